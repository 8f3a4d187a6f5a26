//! Per-cell sample means and confidence radii from warm-up observations.

use serde::Serialize;

use super::policy::Observation;
use crate::error::{Error, Result};
use crate::matrix::{Matrix, MeanMatrix};
use crate::model::{ConfidenceBox, ProblemSpec};

/// Sample statistics for every (player, item type) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateState {
    pub counts: Vec<Vec<u64>>,
    pub sums: Matrix,
    pub mu_hat: MeanMatrix,
    pub eps: Matrix,
    horizon: u64,
    a: f64,
    b: f64,
}

/// Radius `ln(4Tnm) / sqrt(2N)` for a cell with `count` samples.
pub fn confidence_radius(horizon: u64, n: usize, m: usize, count: u64) -> f64 {
    let log = (4.0 * horizon as f64 * n as f64 * m as f64).ln();
    log / (2.0 * count as f64).sqrt()
}

impl EstimateState {
    pub fn empty(spec: &ProblemSpec) -> Self {
        let (n, m) = (spec.n, spec.m);
        let mut st = Self {
            counts: vec![vec![0; m]; n],
            sums: Matrix::zeros(n, m),
            mu_hat: MeanMatrix::new(Matrix::filled(n, m, 0.5 * (spec.a + spec.b))).expect("finite"),
            eps: Matrix::filled(n, m, spec.b - spec.a),
            horizon: spec.horizon,
            a: spec.a,
            b: spec.b,
        };
        st.refresh();
        st
    }

    pub fn record(&mut self, obs: &Observation) {
        self.counts[obs.player][obs.item_type] += 1;
        self.sums[(obs.player, obs.item_type)] += obs.value;
    }

    /// Recomputes `mu_hat` and `eps` from the counts and sums.
    pub fn refresh(&mut self) {
        let (n, m) = self.sums.shape();
        let (a, b) = (self.a, self.b);
        let mut mu = Matrix::zeros(n, m);
        for i in 0..n {
            for k in 0..m {
                let c = self.counts[i][k];
                if c == 0 {
                    // Unvisited cells fall back to the whole range [a, b].
                    mu[(i, k)] = 0.5 * (a + b);
                    self.eps[(i, k)] = b - a;
                } else {
                    mu[(i, k)] = (self.sums[(i, k)] / c as f64).clamp(a, b);
                    self.eps[(i, k)] = confidence_radius(self.horizon, n, m, c);
                }
            }
        }
        self.mu_hat = MeanMatrix::new(mu).expect("clamped means are finite");
    }

    /// Replaces the estimate, e.g. to inject the true means in tests.
    pub fn set(&mut self, mu_hat: MeanMatrix, eps: Matrix) -> Result<()> {
        if mu_hat.shape() != self.sums.shape() {
            return Err(Error::shape(self.sums.shape(), mu_hat.shape()));
        }
        if eps.shape() != self.sums.shape() {
            return Err(Error::shape(self.sums.shape(), eps.shape()));
        }
        self.mu_hat = mu_hat;
        self.eps = eps;
        Ok(())
    }

    pub fn confidence_box(&self) -> Result<ConfidenceBox> {
        ConfidenceBox::new(self.mu_hat.clone(), self.eps.clone(), self.a, self.b)
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Builds the estimate from a warm-up history.
pub fn estimate_means(history: &[Observation], spec: &ProblemSpec) -> Result<EstimateState> {
    let mut st = EstimateState::empty(spec);
    for obs in history {
        if obs.player >= spec.n || obs.item_type >= spec.m {
            return Err(Error::invalid(format!(
                "observation ({}, {}) outside a {}x{} instance",
                obs.player, obs.item_type, spec.n, spec.m
            )));
        }
        st.record(obs);
    }
    st.refresh();
    Ok(st)
}
