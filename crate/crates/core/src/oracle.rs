//! Brute-force cross-checks for the LP and transform code paths.
//!
//! Constraint evaluation here is written from scratch on purpose so that a bug
//! in the main path cannot hide itself.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpStatus, Sense, StandardLP};
use crate::matrix::Matrix;
use crate::model::{ConfidenceBox, Family};
use crate::FEASIBILITY_TOL;

/// Largest number of lattice points `grid_search_optimal` will visit.
pub const GRID_LIMIT: u128 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub verdict: Verdict,
    pub oracle_value: f64,
    pub main_value: f64,
    pub gap: f64,
    /// SHA-256 of the instance, hex encoded.
    pub digest: String,
    /// Constraints that failed, with the measured slack.
    pub failures: Vec<String>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// `(owner, weights)` for every constraint of the family, in a fixed order.
fn oracle_constraints(family: Family, n: usize) -> Vec<(String, usize, Vec<f64>)> {
    let mut out = Vec::new();
    match family {
        Family::Efe => {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let mut w = vec![0.0; n];
                        w[i] = 1.0;
                        w[j] = -1.0;
                        out.push((format!("efe:{i}->{j}"), i, w));
                    }
                }
            }
        }
        Family::Pe => {
            let nf = n as f64;
            for i in 0..n {
                let mut w = vec![-1.0 / nf; n];
                w[i] = (nf - 1.0) / nf;
                out.push((format!("pe:{i}"), i, w));
            }
        }
    }
    out
}

/// `sum_k mu[owner][k] * sum_i w_i x[i][k]`.
fn slack(mu: &Matrix, x: &Matrix, owner: usize, w: &[f64]) -> f64 {
    let mut total = 0.0;
    for k in 0..x.cols() {
        let mut g = 0.0;
        for (i, wi) in w.iter().enumerate() {
            g += wi * x[(i, k)];
        }
        total += mu[(owner, k)] * g;
    }
    total
}

fn welfare(mu: &Matrix, x: &Matrix) -> f64 {
    let mut s = 0.0;
    for i in 0..x.rows() {
        for k in 0..x.cols() {
            s += mu[(i, k)] * x[(i, k)];
        }
    }
    s
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, j| acc * (n - j) / (j + 1))
}

/// All ways to write `total` as an ordered sum of `parts` nonnegative integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Exhaustive search over allocations whose columns lie on the lattice with
/// step `resolution`.
pub fn grid_search_optimal(mu: &Matrix, family: Family, resolution: f64) -> Result<(Matrix, f64)> {
    let (n, m) = mu.shape();
    if n < 2 || m < 1 {
        return Err(Error::invalid("need at least two players and one item type"));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::invalid(format!("resolution must be in (0, 1], got {resolution}")));
    }
    let steps = (1.0 / resolution).round() as usize;
    if ((steps as f64) * resolution - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("1/resolution must be an integer, got {resolution}")));
    }
    let per_column = binomial((steps + n - 1) as u128, (n - 1) as u128);
    let total = per_column.checked_pow(m as u32).unwrap_or(u128::MAX);
    if total > GRID_LIMIT {
        return Err(Error::invalid(format!("grid has {total} points, limit is {GRID_LIMIT}")));
    }
    let columns = compositions(steps, n);
    let cons = oracle_constraints(family, n);
    let mut idx = vec![0usize; m];
    let mut x = Matrix::zeros(n, m);
    let mut best: Option<(Matrix, f64)> = None;
    loop {
        for (k, &c) in idx.iter().enumerate() {
            for i in 0..n {
                x[(i, k)] = columns[c][i] as f64 / steps as f64;
            }
        }
        if cons.iter().all(|(_, o, w)| slack(mu, &x, *o, w) >= -FEASIBILITY_TOL) {
            let v = welfare(mu, &x);
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((x.clone(), v));
            }
        }
        // Odometer over column choices.
        let mut pos = 0;
        while pos < m {
            idx[pos] += 1;
            if idx[pos] < columns.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
        if pos == m {
            break;
        }
    }
    best.ok_or_else(|| Error::invariant("no lattice point is feasible, not even the uniform one"))
}

/// Solves the robust program by writing each constraint out at every vertex
/// of its owner's row of the box.
pub fn robust_lp_via_vertex_enumeration(bx: &ConfidenceBox, family: Family) -> Result<(Matrix, f64)> {
    let lp = vertex_program(bx, family)?;
    let (n, m) = bx.shape();
    let center = bx.clamped_center();
    let out = solve_lp(&lp)?;
    if out.status != LpStatus::Optimal {
        return Err(Error::invariant(format!("vertex-enumerated program is {:?}", out.status)));
    }
    let x = Matrix::from_fn(n, m, |i, k| out.x[i * m + k]);
    let v = welfare(&center, &x);
    Ok((x, v))
}

pub fn vertex_program(bx: &ConfidenceBox, family: Family) -> Result<StandardLP> {
    let (n, m) = bx.shape();
    if n * m > 9 {
        return Err(Error::invalid(format!("vertex enumeration supports n*m <= 9, got {}", n * m)));
    }
    let names: Vec<String> = (0..n * m).map(|j| format!("x{j}")).collect();
    let mut lp = StandardLP::new(names);
    let center = bx.clamped_center();
    for i in 0..n {
        for k in 0..m {
            lp.objective[i * m + k] = center[(i, k)];
        }
    }
    for k in 0..m {
        let mut row = vec![0.0; n * m];
        for i in 0..n {
            row[i * m + k] = 1.0;
        }
        lp.add_row(format!("sum{k}"), row, Sense::Eq, 1.0);
    }
    for (label, owner, w) in oracle_constraints(family, n) {
        for vertex in 0..(1usize << m) {
            let mut row = vec![0.0; n * m];
            for k in 0..m {
                let (lo, hi) = bx.interval(owner, k);
                let v = if vertex >> k & 1 == 1 { hi } else { lo };
                for i in 0..n {
                    row[i * m + k] += v * w[i];
                }
            }
            lp.add_row(format!("{label}@{vertex}"), row, Sense::Ge, 0.0);
        }
    }
    Ok(lp)
}

fn digest(parts: &[&Matrix], scalars: &[f64], tag: &str) -> String {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    for p in parts {
        h.update((p.rows() as u64).to_le_bytes());
        h.update((p.cols() as u64).to_le_bytes());
        for v in p.as_slice() {
            h.update(v.to_le_bytes());
        }
    }
    for s in scalars {
        h.update(s.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn rows_match(x: &Matrix, i: usize, j: usize) -> bool {
    (0..x.cols()).all(|k| (x[(i, k)] - x[(j, k)]).abs() <= 1e-12)
}

/// Checks that every constraint either has slack at least `gamma` at `x2` or
/// has its players holding identical rows, and recomputes the welfare loss.
///
/// `oracle_value` is the loss computed here and `main_value` the loss from the
/// library's Frobenius product.
pub fn verify_property2(mu: &Matrix, y: &Matrix, x2: &Matrix, gamma: f64, family: Family) -> Result<OracleReport> {
    if y.shape() != mu.shape() {
        return Err(Error::shape(mu.shape(), y.shape()));
    }
    if x2.shape() != mu.shape() {
        return Err(Error::shape(mu.shape(), x2.shape()));
    }
    let n = mu.rows();
    let mut failures = Vec::new();
    for (label, owner, w) in oracle_constraints(family, n) {
        let s = slack(mu, x2, owner, &w);
        let equal = match family {
            Family::Efe => {
                let other = w.iter().position(|&v| v < 0.0).expect("pair constraint");
                rows_match(x2, owner, other)
            }
            Family::Pe => (1..n).all(|j| rows_match(x2, 0, j)),
        };
        if !(equal || s >= gamma - FEASIBILITY_TOL) {
            failures.push(format!("{label} slack {s:e} < gamma {gamma:e}"));
        }
    }
    let oracle_value = welfare(mu, y) - welfare(mu, x2);
    let main_value = crate::matrix::frobenius_product(y, mu)? - crate::matrix::frobenius_product(x2, mu)?;
    let gap = (oracle_value - main_value).abs();
    if gap > 1e-9 {
        failures.push(format!("welfare loss disagrees by {gap:e}"));
    }
    Ok(OracleReport {
        verdict: if failures.is_empty() { Verdict::Pass } else { Verdict::Fail },
        oracle_value,
        main_value,
        gap,
        digest: digest(&[mu, y, x2], &[gamma], family.as_str()),
        failures,
    })
}

/// Grid optimum against the LP optimum; passes when the LP is at least as good
/// and within the lattice error bound `n * m * b * resolution`.
pub fn compare_grid(mu: &Matrix, family: Family, resolution: f64, lp_value: f64) -> Result<OracleReport> {
    let (_, value) = grid_search_optimal(mu, family, resolution)?;
    let (n, m) = mu.shape();
    let bound = n as f64 * m as f64 * mu.max_entry() * resolution;
    let gap = (lp_value - value).abs();
    let mut failures = Vec::new();
    if value > lp_value + 1e-6 {
        failures.push(format!("grid point beats the LP by {:e}", value - lp_value));
    }
    if lp_value - value > bound + 1e-9 {
        failures.push(format!("LP exceeds the grid optimum by {gap:e}, bound {bound:e}"));
    }
    Ok(OracleReport {
        verdict: if failures.is_empty() { Verdict::Pass } else { Verdict::Fail },
        oracle_value: value,
        main_value: lp_value,
        gap,
        digest: digest(&[mu], &[resolution], family.as_str()),
        failures,
    })
}

/// Vertex-enumeration optimum against a value from the reformulated program.
pub fn compare_robust(bx: &ConfidenceBox, family: Family, main_value: f64) -> Result<OracleReport> {
    let (_, value) = robust_lp_via_vertex_enumeration(bx, family)?;
    let gap = (value - main_value).abs();
    let failures = if gap > crate::OBJECTIVE_TOL {
        vec![format!("robust optimum differs by {gap:e}")]
    } else {
        Vec::new()
    };
    Ok(OracleReport {
        verdict: if failures.is_empty() { Verdict::Pass } else { Verdict::Fail },
        oracle_value: value,
        main_value,
        gap,
        digest: digest(&[bx.center(), bx.radius()], &[bx.bounds().0, bx.bounds().1], family.as_str()),
        failures,
    })
}
