//! Two-phase revised simplex with Bland's anti-cycling rule. The basis is
//! refactored from the original columns at every step, so rounding error does
//! not accumulate across pivots.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn flipped(self) -> Self {
        match self {
            Sense::Le => Sense::Ge,
            Sense::Ge => Sense::Le,
            Sense::Eq => Sense::Eq,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpRow {
    pub name: String,
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A linear program `max c·x` over rows and per-variable bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StandardLP {
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<Option<f64>>,
    pub names: Vec<String>,
}

impl StandardLP {
    /// An empty program over `names.len()` nonnegative variables.
    pub fn new(names: Vec<String>) -> Self {
        let nv = names.len();
        Self {
            objective: vec![0.0; nv],
            rows: Vec::new(),
            lower: vec![0.0; nv],
            upper: vec![None; nv],
            names,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<f64>, sense: Sense, rhs: f64) {
        self.rows.push(LpRow {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
    }

    fn validate(&self) -> Result<()> {
        let nv = self.num_vars();
        if self.objective.len() != nv || self.lower.len() != nv || self.upper.len() != nv {
            return Err(Error::invalid("objective and bound vectors must match the variable count"));
        }
        if !self.objective.iter().all(|v| v.is_finite()) || !self.lower.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("objective and lower bounds must be finite"));
        }
        if self.upper.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("upper bounds must be finite"));
        }
        for row in &self.rows {
            if row.coeffs.len() != nv {
                return Err(Error::invalid(format!(
                    "row `{}` has {} coefficients, expected {nv}",
                    row.name,
                    row.coeffs.len()
                )));
            }
            if !row.rhs.is_finite() || !row.coeffs.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("row `{}` has non-finite entries", row.name)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Variable values; empty unless optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

/// LU pivots below this fraction of the column's scale mean a singular basis.
const SINGULAR_TOL: f64 = 1e-12;
/// Smallest ratio-test entry, relative to the largest entry of the column;
/// smaller entries are treated as rounding noise on a true zero.
const PIVOT_TOL: f64 = 1e-9;
/// Reduced-cost threshold, relative to the cost scale.
const COST_TOL: f64 = 1e-10;
const PHASE1_TOL: f64 = 1e-9;
/// Allowed residual of the final point against the original rows, relative
/// to the row's scale.
const RESIDUAL_TOL: f64 = 1e-7;

/// Dense LU factorization with partial pivoting, `P B = L U`.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut perm: Vec<usize> = (0..n).collect();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| a[x * n + c].abs().total_cmp(&a[y * n + c].abs()).then(y.cmp(&x)))
                .expect("nonempty range");
            if a[p * n + c].abs() <= SINGULAR_TOL * scale {
                return Err(Error::Numeric(format!("basis matrix is singular at column {c}")));
            }
            if p != c {
                for k in 0..n {
                    a.swap(c * n + k, p * n + k);
                }
                perm.swap(c, p);
            }
            let d = a[c * n + c];
            for r in c + 1..n {
                let f = a[r * n + c] / d;
                if f != 0.0 {
                    a[r * n + c] = f;
                    for k in c + 1..n {
                        a[r * n + k] -= f * a[c * n + k];
                    }
                } else {
                    a[r * n + c] = 0.0;
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    /// Solves `B x = rhs`.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[i * n + k] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu[i * n + k] * x[k];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Solves `B^T y = rhs`.
    fn solve_t(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut v = rhs.to_vec();
        for i in 0..n {
            let mut s = v[i];
            for k in 0..i {
                s -= self.lu[k * n + i] * v[k];
            }
            v[i] = s / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = v[i];
            for k in i + 1..n {
                s -= self.lu[k * n + i] * v[k];
            }
            v[i] = s;
        }
        let mut y = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            y[p] = v[i];
        }
        y
    }
}

/// Equality-form program `A x = b, x >= 0, b >= 0` with a basis.
struct Revised {
    /// Columns of `A`.
    cols: Vec<Vec<f64>>,
    b: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
    max_pivots: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Revised {
    fn rows(&self) -> usize {
        self.b.len()
    }

    fn factor(&self) -> Result<Lu> {
        let m = self.rows();
        let mut a = vec![0.0; m * m];
        for (c, &j) in self.basis.iter().enumerate() {
            for (r, &v) in self.cols[j].iter().enumerate() {
                a[r * m + c] = v;
            }
        }
        Lu::factor(a, m)
    }

    fn basic_values(&self) -> Result<Vec<f64>> {
        Ok(self.factor()?.solve(&self.b))
    }

    /// Primal simplex over columns `0..allowed`. Bland's rule picks the
    /// lowest-index improving column and, among tied ratios, the row whose
    /// basic variable has the lowest index.
    fn optimize(&mut self, costs: &[f64], allowed: usize) -> Result<Step> {
        let cost_scale = 1.0 + costs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut in_basis = vec![false; self.cols.len()];
        loop {
            in_basis.iter_mut().for_each(|v| *v = false);
            for &j in &self.basis {
                in_basis[j] = true;
            }
            let lu = self.factor()?;
            let xb = lu.solve(&self.b);
            let cb: Vec<f64> = self.basis.iter().map(|&j| costs[j]).collect();
            let y = lu.solve_t(&cb);
            let entering = (0..allowed)
                .find(|&j| !in_basis[j] && costs[j] - dot(&y, &self.cols[j]) > COST_TOL * cost_scale);
            let Some(q) = entering else {
                return Ok(Step::Optimal);
            };
            let alpha = lu.solve(&self.cols[q]);
            let amax = alpha.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let tol = PIVOT_TOL * amax.max(1.0);
            let mut best: Option<(usize, f64)> = None;
            for (r, &a) in alpha.iter().enumerate() {
                if a <= tol {
                    continue;
                }
                let ratio = xb[r].max(0.0) / a;
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bratio)) => {
                        let tie = (ratio - bratio).abs() <= 1e-12 * (1.0 + bratio.abs());
                        if (!tie && ratio < bratio) || (tie && self.basis[r] < self.basis[br]) {
                            Some((r, ratio))
                        } else {
                            Some((br, bratio))
                        }
                    }
                };
            }
            let Some((r, _)) = best else {
                return Ok(Step::Unbounded);
            };
            self.basis[r] = q;
            self.pivots += 1;
            if self.pivots > self.max_pivots {
                return Err(Error::Numeric(format!("pivot limit {} exceeded", self.max_pivots)));
            }
        }
    }

    /// Replaces basic artificials (columns `>= art_start`) by structural
    /// columns, dropping rows that turn out to be redundant.
    fn drive_out_artificials(&mut self, art_start: usize) -> Result<()> {
        let mut r = 0;
        while r < self.rows() {
            if self.basis[r] < art_start {
                r += 1;
                continue;
            }
            let lu = self.factor()?;
            let mut e = vec![0.0; self.rows()];
            e[r] = 1.0;
            let u = lu.solve_t(&e);
            let in_basis: Vec<bool> = {
                let mut v = vec![false; self.cols.len()];
                self.basis.iter().for_each(|&j| v[j] = true);
                v
            };
            let mut best: Option<(usize, f64)> = None;
            for j in (0..art_start).filter(|&j| !in_basis[j]) {
                let v = dot(&u, &self.cols[j]).abs();
                if v > 1e-9 && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            match best {
                Some((j, _)) => {
                    self.basis[r] = j;
                    self.pivots += 1;
                    r += 1;
                }
                None => {
                    for col in self.cols.iter_mut() {
                        col.remove(r);
                    }
                    self.b.remove(r);
                    self.basis.remove(r);
                }
            }
        }
        Ok(())
    }
}

/// Solves `prog`. Infeasible and unbounded programs are reported through the
/// status; only numeric breakdown is an error.
pub fn solve_lp(prog: &StandardLP) -> Result<LpOutcome> {
    prog.validate()?;
    let nv = prog.num_vars();

    // Shift lower bounds to zero and turn upper bounds into rows.
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::with_capacity(prog.rows.len() + nv);
    for row in &prog.rows {
        let shift: f64 = row.coeffs.iter().zip(&prog.lower).map(|(a, l)| a * l).sum();
        rows.push((row.coeffs.clone(), row.sense, row.rhs - shift));
    }
    for j in 0..nv {
        if let Some(u) = prog.upper[j] {
            let mut coeffs = vec![0.0; nv];
            coeffs[j] = 1.0;
            rows.push((coeffs, Sense::Le, u - prog.lower[j]));
        }
    }
    for row in rows.iter_mut() {
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|v| *v = -*v);
            row.1 = row.1.flipped();
            row.2 = -row.2;
        }
    }

    let nrows = rows.len();
    let nslack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let nart = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let art_start = nv + nslack;
    let ncols = art_start + nart;

    let mut cols = vec![vec![0.0; nrows]; ncols];
    let mut basis = Vec::with_capacity(nrows);
    let (mut next_slack, mut next_art) = (nv, art_start);
    for (r, (coeffs, sense, _)) in rows.iter().enumerate() {
        for (j, &v) in coeffs.iter().enumerate() {
            cols[j][r] = v;
        }
        match sense {
            Sense::Le => {
                cols[next_slack][r] = 1.0;
                basis.push(next_slack);
                next_slack += 1;
            }
            Sense::Ge => {
                cols[next_slack][r] = -1.0;
                next_slack += 1;
                cols[next_art][r] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
            Sense::Eq => {
                cols[next_art][r] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
        }
    }

    let mut lp = Revised {
        cols,
        b: rows.iter().map(|r| r.2).collect(),
        basis,
        pivots: 0,
        max_pivots: 50_000 + 100 * (nrows + ncols),
    };

    if nart > 0 {
        let mut costs = vec![0.0; ncols];
        costs[art_start..].iter_mut().for_each(|c| *c = -1.0);
        lp.optimize(&costs, ncols)?;
        let xb = lp.basic_values()?;
        let infeasibility: f64 = (0..lp.rows())
            .filter(|&r| lp.basis[r] >= art_start)
            .map(|r| xb[r].max(0.0))
            .sum();
        let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
        if infeasibility > PHASE1_TOL * scale {
            return Ok(LpOutcome {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NAN,
                pivots: lp.pivots,
            });
        }
        lp.drive_out_artificials(art_start)?;
    }

    let mut costs = vec![0.0; ncols];
    costs[..nv].copy_from_slice(&prog.objective);
    if let Step::Unbounded = lp.optimize(&costs, art_start)? {
        return Ok(LpOutcome {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: f64::INFINITY,
            pivots: lp.pivots,
        });
    }

    let xb = lp.basic_values()?;
    let mut x = prog.lower.clone();
    for (r, &j) in lp.basis.iter().enumerate() {
        if j < nv {
            x[j] += xb[r];
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("solution has non-finite entries".into()));
    }
    check_residuals(prog, &x)?;
    let objective = x.iter().zip(&prog.objective).map(|(a, c)| a * c).sum();
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        x,
        objective,
        pivots: lp.pivots,
    })
}

fn check_residuals(prog: &StandardLP, x: &[f64]) -> Result<()> {
    for (j, (&v, &lo)) in x.iter().zip(&prog.lower).enumerate() {
        let scale = 1.0 + lo.abs();
        if v < lo - RESIDUAL_TOL * scale || prog.upper[j].is_some_and(|u| v > u + RESIDUAL_TOL * (1.0 + u.abs())) {
            return Err(Error::Numeric(format!("variable {} = {v:e} leaves its bounds", prog.names[j])));
        }
    }
    for row in &prog.rows {
        let lhs: f64 = row.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        let scale = 1.0 + row.rhs.abs() + row.coeffs.iter().zip(x).map(|(a, v)| (a * v).abs()).sum::<f64>();
        let r = lhs - row.rhs;
        let bad = match row.sense {
            Sense::Le => r > RESIDUAL_TOL * scale,
            Sense::Ge => r < -RESIDUAL_TOL * scale,
            Sense::Eq => r.abs() > RESIDUAL_TOL * scale,
        };
        if bad {
            return Err(Error::Numeric(format!("row {} has residual {r:e} at the final point", row.name)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(names: &[&str]) -> StandardLP {
        StandardLP::new(names.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn single_upper_bound() {
        let mut p = lp(&["x"]);
        p.objective = vec![1.0];
        p.add_row("cap", vec![1.0], Sense::Le, 3.0);
        let out = solve_lp(&p).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.x, vec![3.0]);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let mut p = lp(&["x"]);
        p.objective = vec![1.0];
        p.add_row("hi", vec![1.0], Sense::Le, 1.0);
        p.add_row("lo", vec![1.0], Sense::Ge, 2.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn deterministic_rerun() {
        let mut p = lp(&["x", "y"]);
        p.objective = vec![1.0, 1.0];
        p.add_row("sum", vec![1.0, 1.0], Sense::Le, 1.0);
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p).unwrap();
        assert_eq!(a.objective, 1.0);
        assert_eq!(
            a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn unbounded_detected() {
        let mut p = lp(&["x", "y"]);
        p.objective = vec![1.0, 0.0];
        p.add_row("r", vec![1.0, -1.0], Sense::Le, 1.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn bounds_and_equalities() {
        // max 3x + 2y, x + y = 4, 1 <= x <= 2, y >= 0.
        let mut p = lp(&["x", "y"]);
        p.objective = vec![3.0, 2.0];
        p.lower[0] = 1.0;
        p.upper[0] = Some(2.0);
        p.add_row("tot", vec![1.0, 1.0], Sense::Eq, 4.0);
        let out = solve_lp(&p).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.x[0] - 2.0).abs() < 1e-12 && (out.x[1] - 2.0).abs() < 1e-12);
        assert!((out.objective - 10.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_and_redundant_rows() {
        // min x (as max -x) with -x <= -2 and a duplicated equality.
        let mut p = lp(&["x", "y"]);
        p.objective = vec![-1.0, 0.0];
        p.add_row("a", vec![-1.0, 0.0], Sense::Le, -2.0);
        p.add_row("e1", vec![1.0, 1.0], Sense::Eq, 5.0);
        p.add_row("e2", vec![2.0, 2.0], Sense::Eq, 10.0);
        let out = solve_lp(&p).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.x[0] - 2.0).abs() < 1e-12);
        assert!((out.x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_klee_minty_like_terminates() {
        // A classic cycling example for the largest-coefficient rule.
        let mut p = lp(&["x1", "x2", "x3", "x4"]);
        p.objective = vec![0.75, -150.0, 0.02, -6.0];
        p.add_row("r1", vec![0.25, -60.0, -0.04, 9.0], Sense::Le, 0.0);
        p.add_row("r2", vec![0.5, -90.0, -0.02, 3.0], Sense::Le, 0.0);
        p.add_row("r3", vec![0.0, 0.0, 1.0, 0.0], Sense::Le, 1.0);
        let out = solve_lp(&p).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective - 0.05).abs() < 1e-9);
    }

    #[test]
    fn rejects_ragged_rows() {
        let mut p = lp(&["x"]);
        p.add_row("bad", vec![1.0, 2.0], Sense::Le, 1.0);
        assert!(matches!(solve_lp(&p), Err(Error::InvalidInput(_))));
    }
}
