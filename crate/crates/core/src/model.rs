//! Problem description types shared by the solvers and the simulator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, MeanMatrix};
use crate::MAX_DIM;

/// Fairness notion enforced on every round's allocation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Envy-freeness in expectation.
    Efe,
    /// Proportionality in expectation.
    Pe,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Efe => "efe",
            Family::Pe => "pe",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "efe" => Ok(Family::Efe),
            "pe" => Ok(Family::Pe),
            other => Err(Error::invalid(format!("unknown family `{other}` (expected efe or pe)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub n: usize,
    pub m: usize,
    pub horizon: u64,
    pub a: f64,
    pub b: f64,
    pub family: Family,
    pub item_distribution: Vec<f64>,
}

impl ProblemSpec {
    /// Builds a spec with the uniform item distribution.
    pub fn uniform(n: usize, m: usize, horizon: u64, a: f64, b: f64, family: Family) -> Result<Self> {
        let spec = Self {
            n,
            m,
            horizon,
            a,
            b,
            family,
            item_distribution: vec![1.0 / m.max(1) as f64; m],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n > MAX_DIM {
            return Err(Error::invalid(format!("n must be in 2..={MAX_DIM}, got {}", self.n)));
        }
        if self.m < 1 || self.m > MAX_DIM {
            return Err(Error::invalid(format!("m must be in 1..={MAX_DIM}, got {}", self.m)));
        }
        if self.horizon < 1 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        check_bounds(self.a, self.b)?;
        let d = &self.item_distribution;
        if d.len() != self.m {
            return Err(Error::invalid(format!(
                "item distribution has {} entries, expected {}",
                d.len(),
                self.m
            )));
        }
        if d.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::invalid("item distribution entries must be positive"));
        }
        let total: f64 = d.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("item distribution sums to {total}, expected 1")));
        }
        Ok(())
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.m as f64;
        self.item_distribution.iter().all(|&p| (p - u).abs() <= 1e-15)
    }

    /// Checks that `mu` has this spec's shape and lies in `[a, b]`.
    pub fn check_means(&self, mu: &MeanMatrix) -> Result<()> {
        if mu.shape() != (self.n, self.m) {
            return Err(Error::shape((self.n, self.m), mu.shape()));
        }
        if !mu.within(self.a, self.b) {
            return Err(Error::invalid(format!(
                "mean matrix entries must lie in [{}, {}]",
                self.a, self.b
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_bounds(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite() && b.is_finite() && a <= b) {
        return Err(Error::invalid(format!("mean bounds must satisfy 0 < a <= b, got a={a}, b={b}")));
    }
    Ok(())
}

/// Entrywise box `center ± radius`, intersected with `[a, b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBox {
    center: MeanMatrix,
    radius: Matrix,
    a: f64,
    b: f64,
}

impl ConfidenceBox {
    pub fn new(center: MeanMatrix, radius: Matrix, a: f64, b: f64) -> Result<Self> {
        check_bounds(a, b)?;
        if center.shape() != radius.shape() {
            return Err(Error::shape(center.shape(), radius.shape()));
        }
        if radius.as_slice().iter().any(|&e| !(e >= 0.0)) {
            return Err(Error::invalid("confidence radii must be nonnegative"));
        }
        let bx = Self { center, radius, a, b };
        for i in 0..bx.center.rows() {
            for k in 0..bx.center.cols() {
                let (lo, hi) = bx.interval(i, k);
                if lo > hi {
                    return Err(Error::invalid(format!(
                        "confidence interval for ({i},{k}) is empty after clamping to [{a}, {b}]"
                    )));
                }
            }
        }
        Ok(bx)
    }

    /// A box of radius zero around `mu`.
    pub fn point(mu: MeanMatrix, a: f64, b: f64) -> Result<Self> {
        let (n, m) = mu.shape();
        Self::new(mu, Matrix::zeros(n, m), a, b)
    }

    pub fn center(&self) -> &MeanMatrix {
        &self.center
    }

    pub fn radius(&self) -> &Matrix {
        &self.radius
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.center.shape()
    }

    /// Effective interval `[max(a, c - e), min(b, c + e)]` for entry `(i, k)`.
    pub fn interval(&self, i: usize, k: usize) -> (f64, f64) {
        let c = self.center[(i, k)];
        let e = self.radius[(i, k)];
        ((c - e).max(self.a), (c + e).min(self.b))
    }

    /// The center projected into `[a, b]`; this is the objective used by the robust LP.
    pub fn clamped_center(&self) -> MeanMatrix {
        self.center.clamped(self.a, self.b)
    }

    pub fn contains(&self, mu: &Matrix) -> bool {
        if mu.shape() != self.shape() {
            return false;
        }
        (0..mu.rows()).all(|i| {
            (0..mu.cols()).all(|k| {
                let (lo, hi) = self.interval(i, k);
                mu[(i, k)] >= lo && mu[(i, k)] <= hi
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mu(rows: Vec<Vec<f64>>) -> MeanMatrix {
        MeanMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(ProblemSpec::uniform(2, 2, 10, 1.0, 3.0, Family::Efe).is_ok());
        assert!(ProblemSpec::uniform(1, 2, 10, 1.0, 3.0, Family::Efe).is_err());
        assert!(ProblemSpec::uniform(2, 2, 10, 0.0, 3.0, Family::Efe).is_err());
        assert!(ProblemSpec::uniform(2, 2, 10, 4.0, 3.0, Family::Efe).is_err());
        assert!(ProblemSpec::uniform(65, 2, 10, 1.0, 3.0, Family::Efe).is_err());
        let mut spec = ProblemSpec::uniform(2, 2, 10, 1.0, 3.0, Family::Pe).unwrap();
        spec.item_distribution = vec![0.7, 0.2];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn family_parse() {
        assert_eq!("EFE".parse::<Family>().unwrap(), Family::Efe);
        assert_eq!("pe".parse::<Family>().unwrap(), Family::Pe);
        assert!("ef1".parse::<Family>().is_err());
        assert_eq!(serde_json::to_string(&Family::Pe).unwrap(), "\"pe\"");
    }

    #[test]
    fn box_intervals_are_clamped() {
        let bx = ConfidenceBox::new(
            mu(vec![vec![1.05, 2.0]]),
            Matrix::from_rows(vec![vec![0.1, 5.0]]).unwrap(),
            1.0,
            3.0,
        )
        .unwrap();
        let (lo, hi) = bx.interval(0, 0);
        assert_eq!(lo, 1.0);
        assert!((hi - 1.15).abs() < 1e-15);
        assert_eq!(bx.interval(0, 1), (1.0, 3.0));
    }

    #[test]
    fn box_rejects_empty_or_negative() {
        let c = mu(vec![vec![5.0]]);
        assert!(ConfidenceBox::new(c.clone(), Matrix::zeros(1, 1), 1.0, 3.0).is_err());
        assert!(ConfidenceBox::new(c, Matrix::filled(1, 1, -0.1), 1.0, 10.0).is_err());
    }
}
