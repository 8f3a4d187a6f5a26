//! Allocation policies. A policy only ever sees the recipient's own value for
//! the item it received.

use serde::{Deserialize, Serialize};

use super::estimate::EstimateState;
use crate::error::{Error, Result};
use crate::lp::{solve_optimal_fair, solve_robust_fair, solve_robust_fair_intervals};
use crate::matrix::{make_uar, FractionalAllocation, Matrix, MeanMatrix};
use crate::model::{Family, ProblemSpec};

/// What the policy learns after round `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub t: u64,
    pub item_type: usize,
    pub player: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Warmup,
    Commit,
    /// Policies that never learn.
    Fixed,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Commit => "commit",
            Phase::Fixed => "fixed",
        }
    }
}

pub trait Policy: Send {
    fn next_allocation(&mut self, round: u64) -> Result<FractionalAllocation>;
    fn observe(&mut self, obs: &Observation);
    fn phase(&self, round: u64) -> Phase;
    /// The allocation played after warm-up, once chosen.
    fn committed(&self) -> Option<&FractionalAllocation> {
        None
    }
    /// Mean estimates, for policies that learn.
    fn estimate(&self) -> Option<&EstimateState> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Etc,
    Oracle,
    Uar,
    GreedyUnfair,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Etc => "etc",
            PolicyKind::Oracle => "oracle",
            PolicyKind::Uar => "uar",
            PolicyKind::GreedyUnfair => "greedy_unfair",
        }
    }
}

/// Smallest `L` with `L^3 >= T^2`, i.e. the ceiling of `T^(2/3)`, clamped to `[1, T]`.
pub fn etc_warmup_length(horizon: u64) -> u64 {
    let target = (horizon as u128).pow(2);
    let mut l = ((horizon as f64).powf(2.0 / 3.0).round() as u128).max(1);
    while l > 1 && (l - 1).pow(3) >= target {
        l -= 1;
    }
    while l.pow(3) < target {
        l += 1;
    }
    (l as u64).clamp(1, horizon.max(1))
}

/// Per-column factor `m * D_k` that turns raw means into effective means.
fn column_factors(spec: &ProblemSpec) -> Option<Vec<f64>> {
    if spec.is_uniform() {
        None
    } else {
        Some(spec.item_distribution.iter().map(|&d| spec.m as f64 * d).collect())
    }
}

/// Uniform at random, forever.
pub struct UarPolicy {
    uar: FractionalAllocation,
}

impl UarPolicy {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        Ok(Self {
            uar: make_uar(spec.n, spec.m)?,
        })
    }
}

impl Policy for UarPolicy {
    fn next_allocation(&mut self, _round: u64) -> Result<FractionalAllocation> {
        Ok(self.uar.clone())
    }

    fn observe(&mut self, _obs: &Observation) {}

    fn phase(&self, _round: u64) -> Phase {
        Phase::Fixed
    }
}

/// Plays the best fair allocation for the true means.
pub struct OraclePolicy {
    y: FractionalAllocation,
}

impl OraclePolicy {
    /// `effective_means` are the true means reweighted by the item distribution.
    pub fn new(effective_means: &MeanMatrix, family: Family) -> Result<Self> {
        Ok(Self {
            y: solve_optimal_fair(effective_means, family)?.allocation,
        })
    }

    pub fn allocation(&self) -> &FractionalAllocation {
        &self.y
    }
}

impl Policy for OraclePolicy {
    fn next_allocation(&mut self, _round: u64) -> Result<FractionalAllocation> {
        Ok(self.y.clone())
    }

    fn observe(&mut self, _obs: &Observation) {}

    fn phase(&self, _round: u64) -> Phase {
        Phase::Fixed
    }

    fn committed(&self) -> Option<&FractionalAllocation> {
        Some(&self.y)
    }
}

type EstimateHook = Box<dyn FnMut(&mut EstimateState) -> Result<()> + Send>;

/// How an explore-then-commit policy picks its committed allocation.
enum CommitRule {
    RobustFair(Family),
    Greedy,
}

/// Uniform warm-up followed by a single committed allocation.
pub struct EtcPolicy {
    spec: ProblemSpec,
    rule: CommitRule,
    warmup: u64,
    uar: FractionalAllocation,
    stats: EstimateState,
    committed: Option<FractionalAllocation>,
    hook: Option<EstimateHook>,
}

impl EtcPolicy {
    /// The fair policy: commits to the robust LP solution over the confidence box.
    pub fn new(spec: &ProblemSpec, family: Family) -> Result<Self> {
        Self::build(spec, CommitRule::RobustFair(family))
    }

    /// Same warm-up, but commits to the unconstrained welfare maximizer of the
    /// estimate. Used as an unfair baseline.
    pub fn greedy(spec: &ProblemSpec) -> Result<Self> {
        Self::build(spec, CommitRule::Greedy)
    }

    fn build(spec: &ProblemSpec, rule: CommitRule) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec: spec.clone(),
            rule,
            warmup: etc_warmup_length(spec.horizon),
            uar: make_uar(spec.n, spec.m)?,
            stats: EstimateState::empty(spec),
            committed: None,
            hook: None,
        })
    }

    /// Runs `hook` on the estimate right before the commit step.
    pub fn with_estimate_hook(
        mut self,
        hook: impl FnMut(&mut EstimateState) -> Result<()> + Send + 'static,
    ) -> Self {
        self.hook = Some(Box::new(hook));
        self
    }

    pub fn warmup_length(&self) -> u64 {
        self.warmup
    }

    /// The estimate, finalized once the policy has committed.
    pub fn estimate(&self) -> &EstimateState {
        &self.stats
    }

    fn commit(&mut self) -> Result<FractionalAllocation> {
        self.stats.refresh();
        if let Some(hook) = self.hook.as_mut() {
            hook(&mut self.stats)?;
        }
        let factors = column_factors(&self.spec);
        let x = match self.rule {
            CommitRule::RobustFair(family) => {
                let bx = self.stats.confidence_box()?;
                match &factors {
                    None => solve_robust_fair(&bx, family)?.allocation,
                    Some(f) => {
                        let (n, m) = bx.shape();
                        let lo = Matrix::from_fn(n, m, |i, k| f[k] * bx.interval(i, k).0);
                        let hi = Matrix::from_fn(n, m, |i, k| f[k] * bx.interval(i, k).1);
                        let c = bx.clamped_center();
                        let obj = Matrix::from_fn(n, m, |i, k| f[k] * c[(i, k)]);
                        solve_robust_fair_intervals(&lo, &hi, &obj, family)?.allocation
                    }
                }
            }
            // A positive column factor does not change the per-column argmax.
            CommitRule::Greedy => greedy_allocation(&self.stats.mu_hat),
        };
        self.committed = Some(x.clone());
        Ok(x)
    }
}

/// Gives each item type to the player with the largest mean, lowest index on ties.
pub fn greedy_allocation(mu: &Matrix) -> FractionalAllocation {
    let (n, m) = mu.shape();
    let mut x = Matrix::zeros(n, m);
    for k in 0..m {
        let mut best = 0;
        for i in 1..n {
            if mu[(i, k)] > mu[(best, k)] {
                best = i;
            }
        }
        x[(best, k)] = 1.0;
    }
    FractionalAllocation::new_unchecked(x)
}

impl Policy for EtcPolicy {
    fn next_allocation(&mut self, round: u64) -> Result<FractionalAllocation> {
        if round < self.warmup {
            return Ok(self.uar.clone());
        }
        match &self.committed {
            Some(x) => Ok(x.clone()),
            None => self.commit(),
        }
    }

    fn observe(&mut self, obs: &Observation) {
        if obs.t < self.warmup {
            self.stats.record(obs);
        }
    }

    fn phase(&self, round: u64) -> Phase {
        if round < self.warmup {
            Phase::Warmup
        } else {
            Phase::Commit
        }
    }

    fn committed(&self) -> Option<&FractionalAllocation> {
        self.committed.as_ref()
    }

    fn estimate(&self) -> Option<&EstimateState> {
        self.committed.as_ref().map(|_| &self.stats)
    }
}

/// Instantiates a policy of the given kind.
pub fn make_policy(
    kind: PolicyKind,
    spec: &ProblemSpec,
    effective_means: &MeanMatrix,
) -> Result<Box<dyn Policy>> {
    if effective_means.shape() != (spec.n, spec.m) {
        return Err(Error::shape((spec.n, spec.m), effective_means.shape()));
    }
    Ok(match kind {
        PolicyKind::Etc => Box::new(EtcPolicy::new(spec, spec.family)?),
        PolicyKind::Oracle => Box::new(OraclePolicy::new(effective_means, spec.family)?),
        PolicyKind::Uar => Box::new(UarPolicy::new(spec)?),
        PolicyKind::GreedyUnfair => Box::new(EtcPolicy::greedy(spec)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_lengths() {
        assert_eq!(etc_warmup_length(8), 4);
        assert_eq!(etc_warmup_length(1000), 100);
        assert_eq!(etc_warmup_length(2), 2);
        assert_eq!(etc_warmup_length(1), 1);
        assert_eq!(etc_warmup_length(4096), 256);
        assert_eq!(etc_warmup_length(9), 5);
    }

    #[test]
    fn warmup_is_minimal_cube_root() {
        for t in 1..3000u64 {
            let l = etc_warmup_length(t) as u128;
            let t2 = (t as u128).pow(2);
            assert!(l.pow(3) >= t2 || l == t as u128);
            assert!(l == 1 || (l - 1).pow(3) < t2);
        }
    }

    #[test]
    fn greedy_takes_column_argmax() {
        let mu = Matrix::from_rows(vec![vec![1.0, 2.0, 3.0], vec![2.0, 2.0, 1.0]]).unwrap();
        let x = greedy_allocation(&mu);
        assert_eq!(x.to_rows(), vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 0.0]]);
    }

    #[test]
    fn etc_plays_uar_then_commits() {
        let spec = ProblemSpec::uniform(2, 2, 27, 1.0, 3.0, Family::Efe).unwrap();
        let mut p = EtcPolicy::new(&spec, Family::Efe).unwrap();
        assert_eq!(p.warmup_length(), 9);
        let uar = make_uar(2, 2).unwrap();
        for t in 0..9 {
            assert_eq!(p.next_allocation(t).unwrap(), uar);
            assert_eq!(p.phase(t), Phase::Warmup);
            p.observe(&Observation {
                t,
                item_type: (t % 2) as usize,
                player: ((t / 2) % 2) as usize,
                value: 2.0,
            });
        }
        assert!(p.committed().is_none());
        let x = p.next_allocation(9).unwrap();
        for t in 10..27 {
            assert_eq!(p.next_allocation(t).unwrap(), x);
            assert_eq!(p.phase(t), Phase::Commit);
        }
        assert_eq!(p.committed(), Some(&x));
    }

    #[test]
    fn injected_truth_recovers_the_optimum() {
        let truth = MeanMatrix::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let spec = ProblemSpec::uniform(2, 2, 8, 1.0, 3.0, Family::Efe).unwrap();
        let t2 = truth.clone();
        let mut p = EtcPolicy::new(&spec, Family::Efe)
            .unwrap()
            .with_estimate_hook(move |st| st.set(t2.clone(), Matrix::zeros(2, 2)));
        let x = p.next_allocation(p.warmup_length()).unwrap();
        let best = solve_optimal_fair(&truth, Family::Efe).unwrap().value;
        let got = crate::matrix::frobenius_product(&x, &truth).unwrap();
        assert!((got - best).abs() < 1e-6);
        assert!((best - 4.0).abs() < 1e-9);
    }

    #[test]
    fn policy_kind_names() {
        let k: PolicyKind = serde_json::from_str("\"greedy_unfair\"").unwrap();
        assert_eq!(k, PolicyKind::GreedyUnfair);
        assert_eq!(PolicyKind::Etc.as_str(), "etc");
    }
}
