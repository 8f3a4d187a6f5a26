//! Proportionality slack transform: every player pays into a common pot in
//! proportion to their surplus over the proportional share.

use super::report::{Branch, ConstraintOutcome, IterationRecord, Outcome, TransformReport};
use crate::constraints::{all_satisfied, build_constraints, constraint_slack};
use crate::error::{Error, Result};
use crate::matrix::{frobenius_product, make_uar, validate_allocation, FractionalAllocation, Matrix, MeanMatrix};
use crate::model::{check_bounds, Family};
use crate::FEASIBILITY_TOL;

pub fn proportional_slack_transform(
    mu: &MeanMatrix,
    y: &FractionalAllocation,
    gamma: f64,
    a: f64,
    b: f64,
) -> Result<TransformReport> {
    check_bounds(a, b)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma must be positive"));
    }
    if mu.shape() != y.shape() {
        return Err(Error::shape(mu.shape(), y.shape()));
    }
    let report = validate_allocation(y, FEASIBILITY_TOL);
    if !report.is_ok() {
        return Err(Error::invalid(format!("invalid allocation: {report}")));
    }
    let set = build_constraints(Family::Pe, mu)?;
    let sat = all_satisfied(&set, y, FEASIBILITY_TOL)?;
    if !sat.satisfied {
        return Err(Error::invalid(format!(
            "input violates {} by {:e}",
            sat.worst_label, -sat.worst_slack
        )));
    }

    let (n, m) = y.shape();
    let nf = n as f64;
    let surplus: Vec<f64> = (0..n)
        .map(|i| {
            let own: f64 = y.row(i).iter().zip(mu.row(i)).map(|(x, v)| x * v).sum();
            let share: f64 = mu.row(i).iter().sum::<f64>() / nf;
            (own - share).max(0.0)
        })
        .collect();
    let total: f64 = surplus.iter().sum();
    let threshold = (b / a) * nf * gamma;

    let (x, branch) = if total <= threshold {
        (make_uar(n, m)?.into_matrix(), Branch::Uniform)
    } else {
        let delta = Matrix::from_fn(n, m, |i, k| {
            let row_mass = y.row_sum(i);
            if row_mass <= 0.0 {
                return 0.0;
            }
            (y[(i, k)] / row_mass) * (surplus[i] / total) * (nf * gamma / a)
        });
        let pot: Vec<f64> = (0..m).map(|k| delta.column_sum(k) / nf).collect();
        (
            Matrix::from_fn(n, m, |i, k| y[(i, k)] - delta[(i, k)] + pot[k]),
            Branch::Pot,
        )
    };

    let uniform = branch == Branch::Uniform;
    let mut outcomes = Vec::with_capacity(n);
    for con in set.iter() {
        let slack = constraint_slack(con, &x)?;
        let outcome = if uniform {
            Outcome::EqualRows
        } else if slack >= gamma - FEASIBILITY_TOL {
            Outcome::Slack
        } else {
            Outcome::Violated
        };
        outcomes.push(ConstraintOutcome {
            label: con.label.clone(),
            slack,
            outcome,
        });
    }
    let sw_loss = frobenius_product(y, mu)? - frobenius_product(&x, mu)?;
    if let Some(bad) = outcomes.iter().find(|o| o.outcome == Outcome::Violated) {
        return Err(Error::invariant(format!(
            "{} has slack {:e} below gamma {gamma:e}",
            bad.label, bad.slack
        )));
    }
    if sw_loss > threshold + FEASIBILITY_TOL {
        return Err(Error::invariant(format!(
            "welfare loss {sw_loss:e} exceeds bound {threshold:e}"
        )));
    }
    let check = validate_allocation(&x, FEASIBILITY_TOL);
    if !check.is_ok() {
        return Err(Error::invariant(format!("transform produced an invalid allocation: {check}")));
    }
    Ok(TransformReport {
        output: FractionalAllocation::new_unchecked(x),
        gamma,
        initial_alpha: gamma,
        final_alpha: gamma,
        iterations: 1,
        outcomes,
        sw_loss,
        clamp_events: 0,
        log: vec![IterationRecord {
            iteration: 0,
            branch,
            alpha: gamma,
            edges: 0,
            classes: 0,
            envy_removals: 0,
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu(rows: Vec<Vec<f64>>) -> MeanMatrix {
        MeanMatrix::from_rows(rows).unwrap()
    }

    fn alloc(rows: Vec<Vec<f64>>) -> FractionalAllocation {
        FractionalAllocation::from_rows(rows).unwrap()
    }

    #[test]
    fn zero_surplus_gives_uniform() {
        let r = proportional_slack_transform(
            &mu(vec![vec![1.0], vec![1.0]]),
            &make_uar(2, 1).unwrap(),
            0.3,
            1.0,
            1.0,
        )
        .unwrap();
        assert_eq!(r.output, make_uar(2, 1).unwrap());
        assert_eq!(r.sw_loss, 0.0);
        assert!(r.outcomes.iter().all(|o| o.outcome == Outcome::EqualRows));
    }

    #[test]
    fn pot_redistribution_example() {
        let m = mu(vec![vec![3.0, 1.0], vec![1.0, 3.0]]);
        let y = alloc(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let r = proportional_slack_transform(&m, &y, 0.1, 1.0, 3.0).unwrap();
        let expect = Matrix::from_rows(vec![vec![0.95, 0.05], vec![0.05, 0.95]]).unwrap();
        assert!(r.output.max_abs_diff(&expect).unwrap() < 1e-12);
        assert!((r.outcomes[0].slack - 0.9).abs() < 1e-12);
        assert_eq!(r.outcomes[0].outcome, Outcome::Slack);
        assert!((r.sw_loss - 0.2).abs() < 1e-12);
        assert_eq!(r.log[0].branch, Branch::Pot);
    }

    #[test]
    fn large_gamma_falls_back_to_uniform() {
        let m = mu(vec![vec![3.0, 1.0], vec![1.0, 3.0]]);
        let y = alloc(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let r = proportional_slack_transform(&m, &y, 0.4, 1.0, 3.0).unwrap();
        assert_eq!(r.output, make_uar(2, 2).unwrap());
        assert!((r.sw_loss - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = mu(vec![vec![3.0, 1.0], vec![1.0, 3.0]]);
        let y = alloc(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(proportional_slack_transform(&m, &y, 0.0, 1.0, 3.0).is_err());
        let unfair = alloc(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        assert!(proportional_slack_transform(&m, &unfair, 0.1, 1.0, 3.0).is_err());
    }
}
