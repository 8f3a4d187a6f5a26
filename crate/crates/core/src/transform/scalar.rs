//! Number types the envy-freeness transform can run on.

use std::fmt::Debug;

use num::{BigRational, FromPrimitive, Num, Signed, ToPrimitive, Zero};

pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed {
    /// Exact conversion from a finite double.
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn from_usize(n: usize) -> Self;
    /// Values within this distance count as equal.
    fn zero_tol() -> Self;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_usize(n: usize) -> Self {
        n as f64
    }

    fn zero_tol() -> Self {
        1e-12
    }
}

impl Scalar for BigRational {
    fn from_f64(v: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(v).expect("finite value")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn from_usize(n: usize) -> Self {
        <BigRational as FromPrimitive>::from_usize(n).expect("usize fits")
    }

    fn zero_tol() -> Self {
        BigRational::zero()
    }
}

pub(crate) type Rows<S> = Vec<Vec<S>>;

pub(crate) fn to_rows<S: Scalar>(m: &crate::Matrix) -> Rows<S> {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|&v| S::from_f64(v)).collect())
        .collect()
}

pub(crate) fn to_matrix<S: Scalar>(rows: &Rows<S>) -> crate::Matrix {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    crate::Matrix::from_fn(n, m, |i, k| rows[i][k].to_f64())
}

pub(crate) fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

pub(crate) fn sum<S: Scalar>(a: &[S]) -> S {
    a.iter().fold(S::zero(), |acc, x| acc + x.clone())
}
