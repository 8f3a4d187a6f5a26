//! Envy-freeness and proportionality constraint families.
//!
//! Every constraint has the form `<B, X> >= 0` where `B = w ⊗ mu_o`: an outer
//! product of a per-player weight vector `w` with the owner's row of means.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{frobenius_product, Matrix, MeanMatrix};
use crate::model::Family;

/// Which players a constraint compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ConstraintKind {
    /// Player `i` does not envy player `other`.
    Envy { i: usize, other: usize },
    /// Player `i` gets at least a `1/n` share of their value for everything.
    Proportional { i: usize },
}

impl ConstraintKind {
    pub fn owner(&self) -> usize {
        match *self {
            ConstraintKind::Envy { i, .. } | ConstraintKind::Proportional { i } => i,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            ConstraintKind::Envy { i, other } => format!("efe:{i}->{other}"),
            ConstraintKind::Proportional { i } => format!("pe:{i}"),
        }
    }

    /// Row weights `w` with `B = w ⊗ mu_owner`.
    pub fn row_weights(&self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n];
        match *self {
            ConstraintKind::Envy { i, other } => {
                w[i] = 1.0;
                w[other] = -1.0;
            }
            ConstraintKind::Proportional { i } => {
                let share = 1.0 / n as f64;
                w.iter_mut().for_each(|x| *x = -share);
                w[i] = (n as f64 - 1.0) / n as f64;
            }
        }
        w
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub b: Matrix,
    pub c: f64,
    pub owner_row: usize,
    pub involved: Vec<usize>,
    pub label: String,
    pub kind: ConstraintKind,
}

impl LinearConstraint {
    pub fn from_kind(kind: ConstraintKind, mu: &Matrix) -> Self {
        let (n, m) = mu.shape();
        let owner = kind.owner();
        let w = kind.row_weights(n);
        let b = Matrix::from_fn(n, m, |i, k| w[i] * mu[(owner, k)]);
        let involved = match kind {
            ConstraintKind::Envy { i, other } => vec![i.min(other), i.max(other)],
            ConstraintKind::Proportional { .. } => (0..n).collect(),
        };
        Self {
            b,
            c: 0.0,
            owner_row: owner,
            involved,
            label: kind.label(),
            kind,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintSet {
    pub family: Family,
    pub source_mu: MeanMatrix,
    pub constraints: Vec<LinearConstraint>,
}

impl ConstraintSet {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LinearConstraint> {
        self.constraints.iter()
    }
}

/// Constraint kinds for `n` players in a fixed order: ordered pairs for EFE,
/// players for PE.
pub fn constraint_kinds(family: Family, n: usize) -> Vec<ConstraintKind> {
    match family {
        Family::Efe => (0..n)
            .flat_map(|i| {
                (0..n)
                    .filter(move |&o| o != i)
                    .map(move |other| ConstraintKind::Envy { i, other })
            })
            .collect(),
        Family::Pe => (0..n).map(|i| ConstraintKind::Proportional { i }).collect(),
    }
}

pub fn build_constraints(family: Family, mu: &MeanMatrix) -> Result<ConstraintSet> {
    if let Some(&v) = mu.as_slice().iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid(format!("mean entries must be positive and finite, found {v}")));
    }
    build_constraints_unchecked(family, mu)
}

/// Same as [`build_constraints`] without the positivity check.
pub(crate) fn build_constraints_unchecked(family: Family, mu: &MeanMatrix) -> Result<ConstraintSet> {
    if mu.rows() < 2 {
        return Err(Error::invalid("at least two players are required"));
    }
    let constraints = constraint_kinds(family, mu.rows())
        .into_iter()
        .map(|kind| LinearConstraint::from_kind(kind, mu))
        .collect();
    Ok(ConstraintSet {
        family,
        source_mu: mu.clone(),
        constraints,
    })
}

pub fn constraint_slack(con: &LinearConstraint, x: &Matrix) -> Result<f64> {
    Ok(frobenius_product(&con.b, x)? - con.c)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SatisfactionReport {
    pub satisfied: bool,
    pub worst_label: String,
    pub worst_slack: f64,
}

pub fn all_satisfied(set: &ConstraintSet, x: &Matrix, tol: f64) -> Result<SatisfactionReport> {
    let mut worst: Option<(&str, f64)> = None;
    for con in set.iter() {
        let s = constraint_slack(con, x)?;
        if worst.is_none_or(|(_, w)| s < w) {
            worst = Some((&con.label, s));
        }
    }
    let (label, slack) = worst.ok_or_else(|| Error::invalid("empty constraint set"))?;
    Ok(SatisfactionReport {
        satisfied: slack >= -tol,
        worst_label: label.to_string(),
        worst_slack: slack,
    })
}

/// Rescales means so that uniform-distribution formulas apply to a non-uniform
/// item distribution: `mu'_ik = m * D_k * mu_ik`.
pub fn transform_means_for_distribution(mu: &MeanMatrix, dist: &[f64]) -> Result<MeanMatrix> {
    let m = mu.cols();
    if dist.len() != m {
        return Err(Error::invalid(format!(
            "distribution has {} entries, expected {m}",
            dist.len()
        )));
    }
    if dist.iter().any(|&p| !(p >= 0.0)) || (dist.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("distribution must be nonnegative and sum to 1"));
    }
    let scaled = Matrix::from_fn(mu.rows(), m, |i, k| m as f64 * dist[k] * mu[(i, k)]);
    MeanMatrix::new(scaled)
}
