//! Randomized cross-checks of the main code paths against the oracles.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constraints::build_constraints;
use crate::error::Result;
use crate::lp::{robust_slack, solve_optimal_fair, solve_robust_fair};
use crate::matrix::{Matrix, MeanMatrix};
use crate::model::{ConfidenceBox, Family};
use crate::oracle::{compare_grid, compare_robust, verify_property2};
use crate::transform::{efe_gamma_max, efe_slack_transform, proportional_slack_transform};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub instances: usize,
    pub failures: Vec<String>,
    /// Largest observed value of the suite's tracked ratio (loss over bound,
    /// iterations over budget, ...); at most 1 when everything holds.
    pub worst_ratio: f64,
    pub clamp_events: usize,
    pub elapsed_secs: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

struct Check {
    failures: Vec<String>,
    ratio: f64,
    clamps: usize,
}

impl Check {
    fn ok(ratio: f64) -> Self {
        Self {
            failures: Vec::new(),
            ratio,
            clamps: 0,
        }
    }

    fn fail(msg: String) -> Self {
        Self {
            failures: vec![msg],
            ratio: f64::INFINITY,
            clamps: 0,
        }
    }
}

fn instance_rng(seed: u64, idx: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(idx as u64);
    rng
}

fn random_means(rng: &mut ChaCha20Rng, n: usize, m: usize, a: f64, b: f64) -> MeanMatrix {
    let mu = Matrix::from_fn(n, m, |_, _| if a == b { a } else { rng.random_range(a..=b) });
    MeanMatrix::new(mu).expect("finite")
}

fn collect(name: &str, checks: Vec<Check>, start: Instant) -> SuiteReport {
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    let mut clamps = 0;
    for c in &checks {
        failures.extend(c.failures.iter().cloned());
        worst = worst.max(c.ratio);
        clamps += c.clamps;
    }
    SuiteReport {
        name: name.to_string(),
        instances: checks.len(),
        failures,
        worst_ratio: worst,
        clamp_events: clamps,
        elapsed_secs: start.elapsed().as_secs_f64(),
    }
}

/// Proportional transform on random instances with n, m in 2..=5 and a = 1.
pub fn proportional_suite(count: usize, seed: u64) -> SuiteReport {
    let start = Instant::now();
    let checks = (0..count)
        .into_par_iter()
        .map(|idx| {
            proportional_instance(idx, seed).unwrap_or_else(|e| Check::fail(format!("#{idx}: {e}")))
        })
        .collect();
    collect("proportional", checks, start)
}

fn proportional_instance(idx: usize, seed: u64) -> Result<Check> {
    let mut rng = instance_rng(seed, idx);
    let n = rng.random_range(2..=5);
    let m = rng.random_range(2..=5);
    let a = 1.0;
    let b = rng.random_range(1.0..=5.0);
    let mu = random_means(&mut rng, n, m, a, b);
    let y = solve_optimal_fair(&mu, Family::Pe)?.allocation;
    // Pick gamma so that both the pot and the uniform branch get exercised.
    let surplus: f64 = (0..n)
        .map(|i| {
            let own: f64 = (0..m).map(|k| y[(i, k)] * mu[(i, k)]).sum();
            let share: f64 = mu.row(i).iter().sum::<f64>() / n as f64;
            (own - share).max(0.0)
        })
        .sum();
    let cap = if surplus > 0.0 { 2.0 * surplus * a / (b * n as f64) } else { 1.0 };
    let gamma = rng.random_range(0.0..cap).max(1e-6);
    let report = proportional_slack_transform(&mu, &y, gamma, a, b)?;
    let check = verify_property2(&mu, &y, &report.output, gamma, Family::Pe)?;
    let bound = (b / a) * n as f64 * gamma;
    let mut out = Check::ok(check.oracle_value / bound);
    out.failures.extend(check.failures.iter().map(|f| format!("#{idx}: {f}")));
    if check.oracle_value > bound + 1e-9 {
        out.failures
            .push(format!("#{idx}: loss {:e} exceeds bound {bound:e}", check.oracle_value));
    }
    Ok(out)
}

/// EF transform on random instances with n, m in {2, 3} and gamma up to its
/// admissible maximum.
pub fn efe_suite(count: usize, seed: u64) -> SuiteReport {
    let start = Instant::now();
    let checks = (0..count)
        .into_par_iter()
        .map(|idx| efe_instance(idx, seed).unwrap_or_else(|e| Check::fail(format!("#{idx}: {e}"))))
        .collect();
    collect("efe", checks, start)
}

fn efe_instance(idx: usize, seed: u64) -> Result<Check> {
    let mut rng = instance_rng(seed, idx);
    let n = rng.random_range(2..=3);
    let m = rng.random_range(2..=3);
    let a = 1.0;
    let b = rng.random_range(1.0..=5.0);
    let mu = random_means(&mut rng, n, m, a, b);
    let y = solve_optimal_fair(&mu, Family::Efe)?.allocation;
    let gamma = efe_gamma_max(n, a, b)? * rng.random_range(0.01..=1.0);
    let report = efe_slack_transform(&mu, &y, gamma, a, b)?;
    let x = &report.output;
    let mut failures = Vec::new();
    let budget = n.pow(3);
    if report.iterations > budget {
        failures.push(format!("#{idx}: {} iterations exceed {budget}", report.iterations));
    }
    for k in 0..m {
        let s = x.column_sum(k);
        if (s - 1.0).abs() > 1e-12 {
            failures.push(format!("#{idx}: column {k} sums to {s}"));
        }
    }
    if x.min_entry() < 0.0 {
        failures.push(format!("#{idx}: negative entry {:e}", x.min_entry()));
    }
    // Envy-freeness at gamma = 0, then the slack-or-equal-rows disjunction.
    let ef = verify_property2(&mu, &y, x, 0.0, Family::Efe)?;
    failures.extend(ef.failures.iter().map(|f| format!("#{idx}: not envy-free: {f}")));
    let p2 = verify_property2(&mu, &y, x, gamma, Family::Efe)?;
    failures.extend(p2.failures.iter().map(|f| format!("#{idx}: {f}")));
    let bound = (n as f64).powi(4) * report.initial_alpha;
    if p2.oracle_value > bound + 1e-9 {
        failures.push(format!("#{idx}: loss {:e} exceeds {bound:e}", p2.oracle_value));
    }
    Ok(Check {
        failures,
        ratio: report.iterations as f64 / budget as f64,
        clamps: report.clamp_events,
    })
}

/// Reformulated robust LP against vertex enumeration on random boxes.
pub fn robust_suite(count: usize, seed: u64) -> SuiteReport {
    let start = Instant::now();
    let checks = (0..count)
        .into_par_iter()
        .map(|idx| robust_instance(idx, seed).unwrap_or_else(|e| Check::fail(format!("#{idx}: {e}"))))
        .collect();
    collect("robust", checks, start)
}

fn robust_instance(idx: usize, seed: u64) -> Result<Check> {
    let mut rng = instance_rng(seed, idx);
    let n = rng.random_range(2..=3);
    let m = rng.random_range(1..=3);
    let family = if idx.is_multiple_of(2) { Family::Efe } else { Family::Pe };
    let a = 1.0;
    let b = rng.random_range(1.0..=5.0);
    let center = random_means(&mut rng, n, m, a, b);
    let radius = Matrix::from_fn(n, m, |_, _| rng.random_range(0.0..=(b - a) / 2.0 + 0.1));
    let bx = ConfidenceBox::new(center, radius, a, b)?;
    let sol = solve_robust_fair(&bx, family)?;
    let cmp = compare_robust(&bx, family, sol.value)?;
    let mut failures: Vec<String> = cmp.failures.iter().map(|f| format!("#{idx}: {f}")).collect();
    let set = build_constraints(family, &bx.clamped_center())?;
    for con in set.iter() {
        let s = robust_slack(con, &sol.allocation, &bx)?;
        if s < -1e-9 {
            failures.push(format!("#{idx}: {} robust slack {s:e}", con.label));
        }
    }
    Ok(Check {
        failures,
        ratio: cmp.gap / crate::OBJECTIVE_TOL,
        clamps: 0,
    })
}

/// Lattice search against the known-means LP.
pub fn grid_suite(count: usize, seed: u64) -> SuiteReport {
    let start = Instant::now();
    let checks = (0..count)
        .into_par_iter()
        .map(|idx| grid_instance(idx, seed).unwrap_or_else(|e| Check::fail(format!("#{idx}: {e}"))))
        .collect();
    collect("grid", checks, start)
}

/// Lattice step; divisible by 2 and 3 so the uniform allocation is a lattice point.
pub const GRID_RESOLUTION: f64 = 1.0 / 12.0;

fn grid_instance(idx: usize, seed: u64) -> Result<Check> {
    let mut rng = instance_rng(seed, idx);
    let n = rng.random_range(2..=3);
    let m = rng.random_range(1..=3);
    let family = if idx.is_multiple_of(2) { Family::Efe } else { Family::Pe };
    let b = rng.random_range(1.0..=5.0);
    let mu = random_means(&mut rng, n, m, 1.0, b);
    let lp = solve_optimal_fair(&mu, family)?;
    let cmp = compare_grid(&mu, family, GRID_RESOLUTION, lp.value)?;
    let bound = n as f64 * m as f64 * mu.max_entry() * GRID_RESOLUTION;
    Ok(Check {
        failures: cmp.failures.iter().map(|f| format!("#{idx}: {f}")).collect(),
        ratio: cmp.gap / bound,
        clamps: 0,
    })
}
