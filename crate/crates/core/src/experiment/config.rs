use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{PolicyKind, ValueModel};
use crate::error::{Error, Result};
use crate::matrix::{Matrix, MeanMatrix};
use crate::model::{Family, ProblemSpec};
use crate::MAX_DIM;

/// Where the true means come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanSource {
    Explicit(Vec<Vec<f64>>),
    /// Independent uniform draws in `[a, b]`.
    Random { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub a: f64,
    pub b: f64,
    pub family: Family,
    /// Defaults to uniform over item types.
    #[serde(default)]
    pub item_distribution: Option<Vec<f64>>,
    pub means: MeanSource,
    #[serde(default)]
    pub value_model: ValueModel,
    pub policy: PolicyKind,
    pub horizons: Vec<u64>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    fn config_err(path: &str, message: impl Into<String>) -> Error {
        Error::Config {
            path: path.to_string(),
            message: message.into(),
        }
    }

    /// The spec for one horizon.
    pub fn spec(&self, horizon: u64) -> Result<ProblemSpec> {
        let spec = ProblemSpec {
            n: self.n,
            m: self.m,
            horizon,
            a: self.a,
            b: self.b,
            family: self.family,
            item_distribution: self
                .item_distribution
                .clone()
                .unwrap_or_else(|| vec![1.0 / self.m.max(1) as f64; self.m]),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() {
            return Err(Self::config_err("horizons", "at least one horizon is required"));
        }
        if self.horizons.contains(&0) {
            return Err(Self::config_err("horizons", "horizons must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(Self::config_err("seeds", "at least one seed is required"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Self::config_err("seeds", "seeds must be distinct"));
        }
        let mut hs = self.horizons.clone();
        hs.sort_unstable();
        hs.dedup();
        if hs.len() != self.horizons.len() {
            return Err(Self::config_err("horizons", "horizons must be distinct"));
        }
        if !(2..=MAX_DIM).contains(&self.n) {
            return Err(Self::config_err("n", format!("must be in 2..={MAX_DIM}")));
        }
        if !(1..=MAX_DIM).contains(&self.m) {
            return Err(Self::config_err("m", format!("must be in 1..={MAX_DIM}")));
        }
        if !(self.a > 0.0 && self.a.is_finite() && self.b.is_finite() && self.a <= self.b) {
            return Err(Self::config_err("a", format!("need 0 < a <= b, got a={}, b={}", self.a, self.b)));
        }
        self.spec(self.horizons[0]).map_err(|e| Self::config_err("item_distribution", e.to_string()))?;
        if let MeanSource::Explicit(rows) = &self.means {
            let mu = MeanMatrix::from_rows(rows.clone()).map_err(|e| Self::config_err("means.explicit", e.to_string()))?;
            if mu.shape() != (self.n, self.m) {
                return Err(Self::config_err(
                    "means.explicit",
                    format!("expected a {}x{} matrix", self.n, self.m),
                ));
            }
            if !mu.within(self.a, self.b) {
                return Err(Self::config_err("means.explicit", format!("entries must lie in [{}, {}]", self.a, self.b)));
            }
        }
        match self.value_model {
            ValueModel::Bernoulli if !(self.b < 1.0) => {
                Err(Self::config_err("value_model", "bernoulli values need b < 1"))
            }
            ValueModel::BoundedUniform { half_width } if !(half_width >= 0.0 && half_width.is_finite()) => {
                Err(Self::config_err("value_model.half_width", "must be nonnegative"))
            }
            _ => Ok(()),
        }
    }

    pub fn true_means(&self) -> Result<MeanMatrix> {
        match &self.means {
            MeanSource::Explicit(rows) => MeanMatrix::from_rows(rows.clone()),
            MeanSource::Random { seed } => {
                let mut rng = ChaCha20Rng::seed_from_u64(*seed);
                let (a, b) = (self.a, self.b);
                MeanMatrix::new(Matrix::from_fn(self.n, self.m, |_, _| {
                    if a == b {
                        a
                    } else {
                        rng.random_range(a..=b)
                    }
                }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "n": 2, "m": 2, "a": 1.0, "b": 3.0, "family": "efe",
        "means": {"explicit": [[2.0, 1.0], [1.0, 2.0]]},
        "policy": "oracle", "horizons": [100], "seeds": [1],
        "output_dir": "out"
    }"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::from_json_str(MINIMAL).unwrap();
        assert_eq!(cfg.value_model, ValueModel::Gaussian);
        assert_eq!(cfg.policy, PolicyKind::Oracle);
        assert!(cfg.spec(100).unwrap().is_uniform());
    }

    #[test]
    fn unknown_fields_report_their_path() {
        let text = MINIMAL.replace("\"policy\"", "\"polcy\"");
        let err = ExperimentConfig::from_json_str(&text).unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
        let text = MINIMAL.replace("\"gaussian\"", "").replace(
            "\"policy\"",
            "\"value_model\": {\"kind\": \"bounded_uniform\", \"half_width\": \"x\"}, \"policy\"",
        );
        match ExperimentConfig::from_json_str(&text).unwrap_err() {
            Error::Config { path, .. } => assert!(path.starts_with("value_model"), "{path}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn bad_bounds_are_rejected() {
        let text = MINIMAL.replace("\"a\": 1.0", "\"a\": 0.0");
        assert_eq!(ExperimentConfig::from_json_str(&text).unwrap_err().exit_code(), 1);
        let text = MINIMAL.replace("[[2.0, 1.0], [1.0, 2.0]]", "[[2.0, 1.0], [1.0, 4.0]]");
        assert!(ExperimentConfig::from_json_str(&text).is_err());
    }

    #[test]
    fn random_means_are_seeded() {
        let text = MINIMAL.replace("{\"explicit\": [[2.0, 1.0], [1.0, 2.0]]}", "{\"random\": {\"seed\": 4}}");
        let cfg = ExperimentConfig::from_json_str(&text).unwrap();
        let a = cfg.true_means().unwrap();
        assert_eq!(a, cfg.true_means().unwrap());
        assert!(a.within(1.0, 3.0));
    }
}
