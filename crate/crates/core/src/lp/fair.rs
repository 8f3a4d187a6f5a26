//! Welfare maximization under fairness constraints, for known means and for a
//! confidence box of means.

use serde::Serialize;

use super::simplex::{solve_lp, LpStatus, Sense, StandardLP};
use crate::constraints::{build_constraints, constraint_kinds, ConstraintKind, ConstraintSet, LinearConstraint};
use crate::error::{Error, Result};
use crate::matrix::{validate_allocation, FractionalAllocation, Matrix, MeanMatrix};
use crate::model::{ConfidenceBox, Family};
use crate::FEASIBILITY_TOL;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FairSolution {
    pub allocation: FractionalAllocation,
    pub value: f64,
    pub pivots: usize,
    /// Values of the epigraph variables (robust program only).
    pub aux: Vec<f64>,
}

pub(crate) fn x_index(m: usize, i: usize, k: usize) -> usize {
    i * m + k
}

/// An LP over the `n x m` allocation variables with column-sum equalities.
pub fn allocation_program(n: usize, m: usize, extra_vars: Vec<String>) -> StandardLP {
    let mut names: Vec<String> = (0..n)
        .flat_map(|i| (0..m).map(move |k| format!("x_{i}_{k}")))
        .collect();
    names.extend(extra_vars);
    let mut lp = StandardLP::new(names);
    let nv = lp.num_vars();
    for k in 0..m {
        let mut coeffs = vec![0.0; nv];
        for i in 0..n {
            coeffs[x_index(m, i, k)] = 1.0;
        }
        lp.add_row(format!("col_{k}"), coeffs, Sense::Eq, 1.0);
    }
    lp
}

/// Appends `<B, X> >= c` for every constraint in `set`.
pub fn add_constraint_rows(lp: &mut StandardLP, set: &ConstraintSet) {
    let nv = lp.num_vars();
    for con in set.iter() {
        let mut coeffs = vec![0.0; nv];
        coeffs[..con.b.as_slice().len()].copy_from_slice(con.b.as_slice());
        lp.add_row(con.label.clone(), coeffs, Sense::Ge, con.c);
    }
}

/// The program for the known-means problem.
pub fn build_fair_lp(mu: &MeanMatrix, family: Family) -> Result<StandardLP> {
    let (n, m) = mu.shape();
    let set = build_constraints(family, mu)?;
    let mut lp = allocation_program(n, m, Vec::new());
    lp.objective[..n * m].copy_from_slice(mu.as_slice());
    add_constraint_rows(&mut lp, &set);
    Ok(lp)
}

/// Index of the epigraph variable bounding `|g_k|` for a constraint.
fn epigraph_group(kind: ConstraintKind, n: usize) -> usize {
    match kind {
        ConstraintKind::Envy { i, other } => {
            let (lo, hi) = (i.min(other), i.max(other));
            // Rank of the unordered pair (lo, hi) in lexicographic order.
            lo * (2 * n - lo - 1) / 2 + (hi - lo - 1)
        }
        ConstraintKind::Proportional { i } => i,
    }
}

fn epigraph_groups(family: Family, n: usize) -> usize {
    match family {
        Family::Efe => n * (n - 1) / 2,
        Family::Pe => n,
    }
}

/// The robust program: fairness must hold for every mean matrix in the box.
///
/// Each constraint is linear in the owner's row of means, so its minimum over
/// the box is `sum_k mid_k * g_k - half_k * |g_k|`; `|g_k|` is bounded by
/// shared epigraph variables `z >= ±g`.
pub fn build_robust_lp(bx: &ConfidenceBox, family: Family) -> Result<StandardLP> {
    let (n, m) = bx.shape();
    let lo = Matrix::from_fn(n, m, |i, k| bx.interval(i, k).0);
    let hi = Matrix::from_fn(n, m, |i, k| bx.interval(i, k).1);
    build_interval_lp(&lo, &hi, bx.clamped_center().matrix(), family)
}

/// The robust program over explicit per-entry intervals `[lo, hi]` with an
/// arbitrary welfare objective.
pub fn build_interval_lp(lo: &Matrix, hi: &Matrix, objective: &Matrix, family: Family) -> Result<StandardLP> {
    lo.ensure_same_shape(hi)?;
    lo.ensure_same_shape(objective)?;
    let (n, m) = lo.shape();
    if n < 2 {
        return Err(Error::invalid("at least two players are required"));
    }
    if (0..n * m).any(|j| !(lo.as_slice()[j] <= hi.as_slice()[j])) {
        return Err(Error::invalid("interval lower bounds must not exceed upper bounds"));
    }
    let groups = epigraph_groups(family, n);
    let z_start = n * m;
    let z_names: Vec<String> = (0..groups)
        .flat_map(|p| (0..m).map(move |k| format!("z_{p}_{k}")))
        .collect();
    let mut lp = allocation_program(n, m, z_names);
    let nv = lp.num_vars();
    lp.objective[..n * m].copy_from_slice(objective.as_slice());

    let kinds = constraint_kinds(family, n);
    let mut seen = vec![false; groups];
    for &kind in &kinds {
        let p = epigraph_group(kind, n);
        if std::mem::replace(&mut seen[p], true) {
            continue;
        }
        let w = kind.row_weights(n);
        for k in 0..m {
            for sign in [1.0, -1.0] {
                let mut coeffs = vec![0.0; nv];
                coeffs[z_start + p * m + k] = 1.0;
                for (i, &wi) in w.iter().enumerate() {
                    coeffs[x_index(m, i, k)] = -sign * wi;
                }
                let tag = if sign > 0.0 { "pos" } else { "neg" };
                lp.add_row(format!("abs_{p}_{k}_{tag}"), coeffs, Sense::Ge, 0.0);
            }
        }
    }
    for &kind in &kinds {
        let o = kind.owner();
        let p = epigraph_group(kind, n);
        let w = kind.row_weights(n);
        let mut coeffs = vec![0.0; nv];
        for k in 0..m {
            let (l, h) = (lo[(o, k)], hi[(o, k)]);
            let mid = 0.5 * (l + h);
            let half = 0.5 * (h - l);
            for (i, &wi) in w.iter().enumerate() {
                coeffs[x_index(m, i, k)] += mid * wi;
            }
            coeffs[z_start + p * m + k] = -half;
        }
        lp.add_row(format!("robust_{}", kind.label()), coeffs, Sense::Ge, 0.0);
    }
    Ok(lp)
}

fn extract(lp: &StandardLP, n: usize, m: usize, what: &str) -> Result<(FractionalAllocation, Vec<f64>, usize)> {
    let out = solve_lp(lp)?;
    match out.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::invariant(format!(
                "{what} reported infeasible although the uniform allocation is feasible"
            )))
        }
        LpStatus::Unbounded => {
            return Err(Error::invariant(format!("{what} reported unbounded")));
        }
    }
    let x = Matrix::from_fn(n, m, |i, k| out.x[x_index(m, i, k)]);
    let report = validate_allocation(&x, FEASIBILITY_TOL);
    if !report.is_ok() {
        return Err(Error::invariant(format!("{what} returned an invalid allocation: {report}")));
    }
    Ok((FractionalAllocation::new_unchecked(x), out.x[n * m..].to_vec(), out.pivots))
}

/// Maximizes `<X, mu>` subject to the family's constraints at `mu`.
pub fn solve_optimal_fair(mu: &MeanMatrix, family: Family) -> Result<FairSolution> {
    let (n, m) = mu.shape();
    let lp = build_fair_lp(mu, family)?;
    let (allocation, aux, pivots) = extract(&lp, n, m, "fair welfare program")?;
    let value = crate::matrix::frobenius_product(&allocation, mu)?;
    Ok(FairSolution {
        allocation,
        value,
        pivots,
        aux,
    })
}

/// Maximizes `<X, clamp(center)>` subject to the constraints holding for every
/// mean matrix in the box.
pub fn solve_robust_fair(bx: &ConfidenceBox, family: Family) -> Result<FairSolution> {
    let (n, m) = bx.shape();
    let lp = build_robust_lp(bx, family)?;
    let (allocation, aux, pivots) = extract(&lp, n, m, "robust welfare program")?;
    let value = crate::matrix::frobenius_product(&allocation, &bx.clamped_center())?;
    Ok(FairSolution {
        allocation,
        value,
        pivots,
        aux,
    })
}

/// Robust program over explicit intervals; `value` is measured against `objective`.
pub fn solve_robust_fair_intervals(
    lo: &Matrix,
    hi: &Matrix,
    objective: &Matrix,
    family: Family,
) -> Result<FairSolution> {
    let (n, m) = lo.shape();
    let lp = build_interval_lp(lo, hi, objective, family)?;
    let (allocation, aux, pivots) = extract(&lp, n, m, "robust welfare program")?;
    let value = crate::matrix::frobenius_product(&allocation, objective)?;
    Ok(FairSolution {
        allocation,
        value,
        pivots,
        aux,
    })
}

/// Minimum of `<B(mu), X>` over all `mu` in the box.
pub fn robust_slack(con: &LinearConstraint, x: &Matrix, bx: &ConfidenceBox) -> Result<f64> {
    if x.shape() != bx.shape() {
        return Err(Error::shape(bx.shape(), x.shape()));
    }
    let (n, m) = x.shape();
    let w = con.kind.row_weights(n);
    let mut total = -con.c;
    for k in 0..m {
        let g: f64 = (0..n).map(|i| w[i] * x[(i, k)]).sum();
        let (lo, hi) = bx.interval(con.owner_row, k);
        total += if g >= 0.0 { lo * g } else { hi * g };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::all_satisfied;
    use crate::matrix::{frobenius_product, make_uar};

    fn mu(rows: Vec<Vec<f64>>) -> MeanMatrix {
        MeanMatrix::from_rows(rows).unwrap()
    }

    fn boxed(center: Vec<Vec<f64>>, eps: f64, a: f64, b: f64) -> ConfidenceBox {
        let c = mu(center);
        let (n, m) = c.shape();
        ConfidenceBox::new(c, Matrix::filled(n, m, eps), a, b).unwrap()
    }

    #[test]
    fn diagonal_preferences_reach_full_welfare() {
        let mu = mu(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        let sol = solve_optimal_fair(&mu, Family::Efe).unwrap();
        assert!((sol.value - 4.0).abs() < 1e-9);
        let set = build_constraints(Family::Efe, &mu).unwrap();
        assert!(all_satisfied(&set, &sol.allocation, 1e-9).unwrap().satisfied);
    }

    #[test]
    fn binding_instance_value_four() {
        let mu = mu(vec![vec![3.0, 3.0], vec![1.0, 1.0]]);
        let sol = solve_optimal_fair(&mu, Family::Efe).unwrap();
        assert!((sol.value - 4.0).abs() < 1e-9);
    }

    #[test]
    fn lower_bound_instance_allocation() {
        let t = 100.0;
        let mu = mu(vec![vec![1e-9, 1.0 / (t * t)], vec![1.0, 0.5]]);
        let sol = solve_optimal_fair(&mu, Family::Efe).unwrap();
        let y = &sol.allocation;
        assert!(y[(0, 0)].abs() < 1e-6);
        assert!((y[(1, 0)] - 1.0).abs() < 1e-6);
        assert!((y[(0, 1)] - 0.5).abs() < 1e-3);
        assert!((y[(1, 1)] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn robust_keeps_diagonal_with_margin() {
        let bx = boxed(vec![vec![2.0, 1.0], vec![1.0, 2.0]], 0.05, 1.0, 2.0);
        let sol = solve_robust_fair(&bx, Family::Efe).unwrap();
        assert!((sol.value - 4.0).abs() < 1e-9);
        let eye = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let set = build_constraints(Family::Efe, bx.center()).unwrap();
        // Worst case of player 0: 1.95 * 1 - 1.05 * 1.
        let s = robust_slack(&set.constraints[0], &eye, &bx).unwrap();
        assert!((s - 0.9).abs() < 1e-12);
    }

    #[test]
    fn robust_slack_of_uniform_is_zero_and_point_box_matches() {
        let bx = boxed(vec![vec![3.0, 1.5, 2.0], vec![1.0, 2.5, 1.2]], 0.3, 1.0, 3.0);
        let uar = make_uar(2, 3).unwrap();
        let x = Matrix::from_rows(vec![vec![0.7, 0.1, 0.5], vec![0.3, 0.9, 0.5]]).unwrap();
        let point = ConfidenceBox::point(bx.center().clone(), 1.0, 3.0).unwrap();
        for family in [Family::Efe, Family::Pe] {
            let set = build_constraints(family, bx.center()).unwrap();
            for con in set.iter() {
                assert_eq!(robust_slack(con, &uar, &bx).unwrap().abs(), 0.0);
                let exact = crate::constraints::constraint_slack(con, &x).unwrap();
                assert!((robust_slack(con, &x, &point).unwrap() - exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn robust_binding_instance_below_four() {
        let bx = boxed(vec![vec![3.0, 3.0], vec![1.0, 1.0]], 0.1, 1.0, 3.0);
        let sol = solve_robust_fair(&bx, Family::Efe).unwrap();
        let v = frobenius_product(&sol.allocation, &bx.clamped_center()).unwrap();
        assert!((v - sol.value).abs() < 1e-12);
        assert!(sol.value <= 4.0 + 1e-9);
        let set = build_constraints(Family::Efe, bx.center()).unwrap();
        for con in set.iter() {
            assert!(robust_slack(con, &sol.allocation, &bx).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn pe_solutions_are_feasible() {
        let mu = mu(vec![vec![1.0, 4.0, 2.0], vec![3.0, 1.0, 2.5], vec![2.0, 2.0, 1.0]]);
        let sol = solve_optimal_fair(&mu, Family::Pe).unwrap();
        let set = build_constraints(Family::Pe, &mu).unwrap();
        assert!(all_satisfied(&set, &sol.allocation, 1e-9).unwrap().satisfied);
        let uar_value = frobenius_product(&make_uar(3, 3).unwrap(), &mu).unwrap();
        assert!(sol.value >= uar_value - 1e-9);
    }

    #[test]
    fn pair_ranks_are_dense() {
        let n = 5;
        let mut ranks: Vec<usize> = constraint_kinds(Family::Efe, n)
            .into_iter()
            .map(|k| epigraph_group(k, n))
            .collect();
        ranks.sort();
        ranks.dedup();
        assert_eq!(ranks, (0..n * (n - 1) / 2).collect::<Vec<_>>());
    }
}
