//! The online loop.

use serde::Serialize;

use super::env::Environment;
use super::policy::{Observation, Phase, Policy};
use crate::error::{Error, Result};
use crate::matrix::{frobenius_product, validate_allocation, FractionalAllocation};
use crate::FEASIBILITY_TOL;

/// Everything that happened in one episode, including the hidden values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeTrace {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub item_types: Vec<usize>,
    pub recipients: Vec<usize>,
    /// Row-major `T x n`: every player's value for round `t`'s item.
    pub values: Vec<f64>,
    /// Index into `allocations` for each round.
    pub allocation_ids: Vec<usize>,
    pub allocations: Vec<FractionalAllocation>,
    pub phases: Vec<Phase>,
    /// `<X_t, mu>` for the effective true means.
    pub expected_sw: Vec<f64>,
    pub committed: Option<FractionalAllocation>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.item_types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_types.is_empty()
    }

    pub fn hidden_values(&self, t: usize) -> &[f64] {
        &self.values[t * self.n..(t + 1) * self.n]
    }

    /// The value the recipient reported in round `t`.
    pub fn observed_value(&self, t: usize) -> f64 {
        self.hidden_values(t)[self.recipients[t]]
    }

    pub fn allocation(&self, t: usize) -> &FractionalAllocation {
        &self.allocations[self.allocation_ids[t]]
    }
}

/// Runs `horizon` rounds of `policy` against `env`.
pub fn run_episode(env: &mut Environment, policy: &mut dyn Policy, horizon: u64) -> Result<EpisodeTrace> {
    let (n, m) = (env.spec().n, env.spec().m);
    let cap = horizon as usize;
    let mut trace = EpisodeTrace {
        n,
        m,
        seed: env.seed(),
        item_types: Vec::with_capacity(cap),
        recipients: Vec::with_capacity(cap),
        values: Vec::with_capacity(cap * n),
        allocation_ids: Vec::with_capacity(cap),
        allocations: Vec::new(),
        phases: Vec::with_capacity(cap),
        expected_sw: Vec::with_capacity(cap),
        committed: None,
    };
    let mut sw = 0.0;
    let mut buf = vec![0.0; n];
    for t in 0..horizon {
        let k = env.draw_item();
        let x = policy.next_allocation(t)?;
        if trace.allocations.last() != Some(&x) {
            let report = validate_allocation(&x, FEASIBILITY_TOL);
            if x.shape() != (n, m) || !report.is_ok() {
                return Err(Error::invariant(format!(
                    "policy returned an invalid allocation at round {t}: {report}"
                )));
            }
            sw = frobenius_product(&x, env.effective_means())?;
            trace.allocations.push(x);
        }
        let xt = trace.allocations.last().expect("pushed above");
        let column: Vec<f64> = (0..n).map(|i| xt[(i, k)]).collect();
        let i = env.draw_recipient(&column);
        env.draw_values(k, &mut buf);
        policy.observe(&Observation {
            t,
            item_type: k,
            player: i,
            value: buf[i],
        });
        trace.item_types.push(k);
        trace.recipients.push(i);
        trace.values.extend_from_slice(&buf);
        trace.allocation_ids.push(trace.allocations.len() - 1);
        trace.phases.push(policy.phase(t));
        trace.expected_sw.push(sw);
    }
    trace.committed = policy.committed().cloned();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::env::ValueModel;
    use crate::bandit::policy::{OraclePolicy, UarPolicy};
    use crate::matrix::MeanMatrix;
    use crate::model::{Family, ProblemSpec};

    fn setup(t: u64, seed: u64) -> (ProblemSpec, Environment) {
        let spec = ProblemSpec::uniform(2, 2, t, 1.0, 3.0, Family::Efe).unwrap();
        let mu = MeanMatrix::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let env = Environment::new(spec.clone(), mu, ValueModel::Gaussian, seed).unwrap();
        (spec, env)
    }

    #[test]
    fn oracle_runs_are_identical() {
        let run = || {
            let (_, mut env) = setup(500, 42);
            let mut p = OraclePolicy::new(env.effective_means(), Family::Efe).unwrap();
            run_episode(&mut env, &mut p, 500).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        assert_eq!(a.allocations.len(), 1);
    }

    #[test]
    fn empty_horizon_gives_empty_trace() {
        let (spec, mut env) = setup(1, 1);
        let mut p = UarPolicy::new(&spec).unwrap();
        let tr = run_episode(&mut env, &mut p, 0).unwrap();
        assert!(tr.is_empty());
    }

    #[test]
    fn uar_counts_concentrate() {
        let t = 10_000u64;
        let (spec, mut env) = setup(t, 5);
        let mut p = UarPolicy::new(&spec).unwrap();
        let tr = run_episode(&mut env, &mut p, t).unwrap();
        let mut counts = [[0u64; 2]; 2];
        for s in 0..tr.len() {
            counts[tr.recipients[s]][tr.item_types[s]] += 1;
        }
        // Each (player, type) cell has probability 1/4.
        let sigma = (t as f64 * 0.25 * 0.75).sqrt();
        for row in counts {
            for c in row {
                assert!((c as f64 - 2500.0).abs() <= 4.0 * sigma, "count {c}");
            }
        }
    }

    #[test]
    fn recipients_respect_deterministic_columns() {
        let (_, mut env) = setup(200, 9);
        let mut p = OraclePolicy::new(env.effective_means(), Family::Efe).unwrap();
        let tr = run_episode(&mut env, &mut p, 200).unwrap();
        // The optimum gives type k to player k.
        for s in 0..tr.len() {
            assert_eq!(tr.recipients[s], tr.item_types[s]);
            assert_eq!(tr.observed_value(s), tr.hidden_values(s)[tr.recipients[s]]);
        }
    }

    struct Broken;

    impl Policy for Broken {
        fn next_allocation(&mut self, _round: u64) -> Result<FractionalAllocation> {
            Ok(FractionalAllocation::new_unchecked(
                crate::matrix::Matrix::filled(2, 2, 0.9),
            ))
        }
        fn observe(&mut self, _obs: &Observation) {}
        fn phase(&self, _round: u64) -> Phase {
            Phase::Fixed
        }
    }

    #[test]
    fn invalid_allocations_abort() {
        let (_, mut env) = setup(10, 1);
        let err = run_episode(&mut env, &mut Broken, 10).unwrap_err();
        assert!(err.to_string().contains("round 0"));
    }
}
