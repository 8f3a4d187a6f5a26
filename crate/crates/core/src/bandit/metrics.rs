//! Regret and realized-fairness measurements over a finished trace.

use super::episode::EpisodeTrace;
use crate::error::{Error, Result};
use crate::lp::solve_optimal_fair;
use crate::matrix::MeanMatrix;
use crate::model::Family;

#[derive(Clone, Debug, PartialEq)]
pub struct Regret {
    pub optimum: f64,
    pub per_step: Vec<f64>,
    pub cumulative: f64,
}

/// Regret in expectation against the best fair allocation for `mu`.
///
/// `mu` must be the matrix the trace's `expected_sw` was measured with.
pub fn expected_regret(trace: &EpisodeTrace, mu: &MeanMatrix, family: Family) -> Result<Regret> {
    if mu.shape() != (trace.n, trace.m) {
        return Err(Error::shape((trace.n, trace.m), mu.shape()));
    }
    let optimum = solve_optimal_fair(mu, family)?.value;
    Ok(regret_against(trace, optimum))
}

pub fn regret_against(trace: &EpisodeTrace, optimum: f64) -> Regret {
    let per_step: Vec<f64> = trace.expected_sw.iter().map(|sw| optimum - sw).collect();
    let cumulative = per_step.iter().sum();
    Regret {
        optimum,
        per_step,
        cumulative,
    }
}

/// `table[i][j]` is player `i`'s total value for player `j`'s bundle.
struct BundleTable {
    n: usize,
    table: Vec<f64>,
}

impl BundleTable {
    fn new(n: usize) -> Self {
        Self {
            n,
            table: vec![0.0; n * n],
        }
    }

    fn add(&mut self, recipient: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self.table[i * self.n + recipient] += v;
        }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.table[i * self.n + j]
    }

    fn envy(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.n {
            let own = self.get(i, i);
            for j in 0..self.n {
                worst = worst.max(self.get(i, j) - own);
            }
        }
        worst
    }

    fn prop_gap(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.n {
            let avg: f64 = (0..self.n).map(|j| self.get(i, j)).sum::<f64>() / self.n as f64;
            worst = worst.max(avg - self.get(i, i));
        }
        worst
    }
}

fn check_tau(trace: &EpisodeTrace, tau: usize) -> Result<()> {
    if tau > trace.len() {
        return Err(Error::invalid(format!("tau {tau} exceeds trace length {}", trace.len())));
    }
    Ok(())
}

fn prefix_table(trace: &EpisodeTrace, tau: usize) -> BundleTable {
    let mut tab = BundleTable::new(trace.n);
    for t in 0..tau {
        tab.add(trace.recipients[t], trace.hidden_values(t));
    }
    tab
}

/// Largest value any player sees in another bundle beyond their own, after `tau` rounds.
pub fn realized_envy(trace: &EpisodeTrace, tau: usize) -> Result<f64> {
    check_tau(trace, tau)?;
    Ok(prefix_table(trace, tau).envy())
}

/// Largest shortfall of a player's own bundle against the average bundle, after `tau` rounds.
pub fn realized_prop_gap(trace: &EpisodeTrace, tau: usize) -> Result<f64> {
    check_tau(trace, tau)?;
    Ok(prefix_table(trace, tau).prop_gap())
}

/// Entry `t` holds the metrics after round `t` (that is, at `tau = t + 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct FairnessSeries {
    pub envy: Vec<f64>,
    pub prop_gap: Vec<f64>,
}

pub fn realized_series(trace: &EpisodeTrace) -> FairnessSeries {
    let mut tab = BundleTable::new(trace.n);
    let mut envy = Vec::with_capacity(trace.len());
    let mut prop_gap = Vec::with_capacity(trace.len());
    for t in 0..trace.len() {
        tab.add(trace.recipients[t], trace.hidden_values(t));
        envy.push(tab.envy());
        prop_gap.push(tab.prop_gap());
    }
    FairnessSeries { envy, prop_gap }
}
