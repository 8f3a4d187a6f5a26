use serde::Serialize;

use crate::constraints::build_constraints;
use crate::error::{Error, Result};
use crate::lp::{add_constraint_rows, allocation_program, solve_lp, solve_optimal_fair, LpStatus};
use crate::matrix::{frobenius_product, make_uar, Matrix, MeanMatrix};
use crate::model::Family;

/// Stand-in for the zero entries of the two-instance construction.
pub const ZERO_SURROGATE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoordinateRange {
    pub i: usize,
    pub k: usize,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub horizon: u64,
    pub mu1: Vec<Vec<f64>>,
    pub mu2: Vec<Vec<f64>>,
    /// Range of each coordinate over allocations envy-free for both instances.
    pub ranges: Vec<CoordinateRange>,
    /// Largest distance of any range endpoint from 1/2.
    pub max_deviation: f64,
    pub best_for_mu2: Vec<Vec<f64>>,
    pub best_value_mu2: f64,
    pub uar_value_mu2: f64,
    pub per_step_gap: f64,
    /// `per_step_gap * horizon`: regret of always playing the only safe allocation.
    pub regret_if_uniform: f64,
}

/// Two 2x2 instances, differing only in player 0's tiny values, whose
/// envy-free sets intersect only at the uniform allocation.
pub fn lower_bound_instances(horizon: u64) -> Result<(MeanMatrix, MeanMatrix)> {
    if horizon < 2 {
        return Err(Error::invalid("horizon must be at least 2"));
    }
    let small = 1.0 / (horizon as f64).powi(2);
    let mu1 = MeanMatrix::from_rows(vec![vec![small, ZERO_SURROGATE], vec![1.0, 0.5]])?;
    let mu2 = MeanMatrix::from_rows(vec![vec![ZERO_SURROGATE, small], vec![1.0, 0.5]])?;
    Ok((mu1, mu2))
}

pub fn demo_lower_bound(horizon: u64) -> Result<LowerBoundReport> {
    let (mu1, mu2) = lower_bound_instances(horizon)?;
    let (n, m) = mu1.shape();
    let mut lp = allocation_program(n, m, Vec::new());
    add_constraint_rows(&mut lp, &build_constraints(Family::Efe, &mu1)?);
    add_constraint_rows(&mut lp, &build_constraints(Family::Efe, &mu2)?);

    let mut ranges = Vec::new();
    let mut max_deviation: f64 = 0.0;
    for i in 0..n {
        for k in 0..m {
            let mut ends = [0.0; 2];
            for (slot, sign) in [(0, -1.0), (1, 1.0)] {
                let mut prog = lp.clone();
                prog.objective = vec![0.0; n * m];
                prog.objective[i * m + k] = sign;
                let out = solve_lp(&prog)?;
                if out.status != LpStatus::Optimal {
                    return Err(Error::invariant(format!(
                        "coordinate ({i},{k}) program is {:?}",
                        out.status
                    )));
                }
                ends[slot] = out.x[i * m + k];
            }
            max_deviation = max_deviation.max((ends[0] - 0.5).abs()).max((ends[1] - 0.5).abs());
            ranges.push(CoordinateRange {
                i,
                k,
                min: ends[0],
                max: ends[1],
            });
        }
    }

    let best = solve_optimal_fair(&mu2, Family::Efe)?;
    let uar = make_uar(n, m)?;
    let uar_value = frobenius_product(&uar, &mu2)?;
    let gap = best.value - uar_value;
    Ok(LowerBoundReport {
        horizon,
        mu1: mu1.to_rows(),
        mu2: mu2.to_rows(),
        ranges,
        max_deviation,
        best_for_mu2: Matrix::clone(&best.allocation).to_rows(),
        best_value_mu2: best.value,
        uar_value_mu2: uar_value,
        per_step_gap: gap,
        regret_if_uniform: gap * horizon as f64,
    })
}
