//! Stochastic item/value environment.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Bernoulli, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::constraints::transform_means_for_distribution;
use crate::error::{Error, Result};
use crate::matrix::MeanMatrix;
use crate::model::ProblemSpec;

/// Distribution of a player's value for one item around its mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueModel {
    /// Normal with variance 1.
    #[default]
    Gaussian,
    /// Value 1 with probability equal to the mean, else 0.
    Bernoulli,
    /// Uniform on `[mean - half_width, mean + half_width]`.
    BoundedUniform { half_width: f64 },
}

const ITEM_STREAM: u64 = 0;
const VALUE_STREAM: u64 = 1;
const ALLOCATION_STREAM: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub struct Environment {
    spec: ProblemSpec,
    true_means: MeanMatrix,
    effective_means: MeanMatrix,
    value_model: ValueModel,
    seed: u64,
    items: WeightedIndex<f64>,
    item_rng: ChaCha20Rng,
    value_rng: ChaCha20Rng,
    allocation_rng: ChaCha20Rng,
}

impl Environment {
    pub fn new(spec: ProblemSpec, true_means: MeanMatrix, value_model: ValueModel, seed: u64) -> Result<Self> {
        spec.validate()?;
        spec.check_means(&true_means)?;
        match value_model {
            ValueModel::Bernoulli if !(spec.b < 1.0) => {
                return Err(Error::invalid("bernoulli values need mean bounds inside (0, 1)"));
            }
            ValueModel::BoundedUniform { half_width } if !(half_width >= 0.0 && half_width.is_finite()) => {
                return Err(Error::invalid("uniform half-width must be nonnegative"));
            }
            _ => {}
        }
        let items = WeightedIndex::new(&spec.item_distribution)
            .map_err(|e| Error::invalid(format!("item distribution: {e}")))?;
        let effective_means = if spec.is_uniform() {
            true_means.clone()
        } else {
            transform_means_for_distribution(&true_means, &spec.item_distribution)?
        };
        Ok(Self {
            spec,
            true_means,
            effective_means,
            value_model,
            seed,
            items,
            item_rng: stream(seed, ITEM_STREAM),
            value_rng: stream(seed, VALUE_STREAM),
            allocation_rng: stream(seed, ALLOCATION_STREAM),
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn true_means(&self) -> &MeanMatrix {
        &self.true_means
    }

    /// Means reweighted by the item distribution; equal to the true means when
    /// item types are uniform. Welfare and fairness are linear in these.
    pub fn effective_means(&self) -> &MeanMatrix {
        &self.effective_means
    }

    pub fn value_model(&self) -> ValueModel {
        self.value_model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draw_item(&mut self) -> usize {
        self.items.sample(&mut self.item_rng)
    }

    /// Samples the recipient from a probability column.
    pub fn draw_recipient(&mut self, column: &[f64]) -> usize {
        let u: f64 = self.allocation_rng.random();
        let total: f64 = column.iter().map(|p| p.max(0.0)).sum();
        let target = u * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in column.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = i;
                if target < acc {
                    return i;
                }
            }
        }
        last
    }

    /// Every player's value for an item of type `k`.
    pub fn draw_values(&mut self, k: usize, out: &mut [f64]) {
        let n = self.spec.n;
        for (i, slot) in out.iter_mut().enumerate().take(n) {
            let mean = self.true_means[(i, k)];
            *slot = match self.value_model {
                ValueModel::Gaussian => Normal::new(mean, 1.0)
                    .expect("finite mean")
                    .sample(&mut self.value_rng),
                ValueModel::Bernoulli => {
                    let hit = Bernoulli::new(mean).expect("mean in (0, 1)").sample(&mut self.value_rng);
                    if hit {
                        1.0
                    } else {
                        0.0
                    }
                }
                ValueModel::BoundedUniform { half_width } => {
                    if half_width == 0.0 {
                        mean
                    } else {
                        Uniform::new_inclusive(mean - half_width, mean + half_width)
                            .expect("valid range")
                            .sample(&mut self.value_rng)
                    }
                }
            };
        }
    }
}
