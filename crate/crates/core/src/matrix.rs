//! Dense row-major matrices and the two domain newtypes built on them.

use std::ops::{Deref, Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `rows x cols` matrix of reals, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for k in 0..cols {
                data.push(f(i, k));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 {
            return Err(Error::invalid("matrix must have at least one row and one column"));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(Error::invalid(format!(
                "row {i} has {} entries, expected {m}",
                r.len()
            )));
        }
        Ok(Self {
            rows: n,
            cols: m,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column_sum(&self, k: usize) -> f64 {
        (0..self.rows).map(|i| self[(i, k)]).sum()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_shape(other)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Entrywise l1 norm.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_same_shape(&self, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(self.shape(), other.shape()));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, k): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && k < self.cols);
        &self.data[i * self.cols + k]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, k): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && k < self.cols);
        &mut self.data[i * self.cols + k]
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

/// Per-(player, item type) mean values. Rows are players, columns item types.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeanMatrix(Matrix);

impl MeanMatrix {
    pub fn new(values: Matrix) -> Result<Self> {
        if !values.is_finite() {
            return Err(Error::invalid("mean matrix has non-finite entries"));
        }
        Ok(Self(values))
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn players(&self) -> usize {
        self.0.rows()
    }

    pub fn item_types(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Projects every entry into `[lo, hi]`.
    pub fn clamped(&self, lo: f64, hi: f64) -> Self {
        Self(self.0.map(|v| v.clamp(lo, hi)))
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.0.as_slice().iter().all(|&v| v >= lo && v <= hi)
    }
}

impl Deref for MeanMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// Column-stochastic matrix: entry `(i, k)` is the probability that player `i`
/// receives an item of type `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FractionalAllocation(Matrix);

impl FractionalAllocation {
    /// Wraps `probs` after checking it at tolerance [`crate::FEASIBILITY_TOL`].
    pub fn new(probs: Matrix) -> Result<Self> {
        let report = validate_allocation(&probs, crate::FEASIBILITY_TOL);
        if !report.is_ok() {
            return Err(Error::invalid(format!("invalid allocation: {report}")));
        }
        Ok(Self(probs))
    }

    /// Wraps `probs` without validation. Callers use [`validate_allocation`] when they
    /// need a report instead of an error.
    pub fn new_unchecked(probs: Matrix) -> Self {
        Self(probs)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn players(&self) -> usize {
        self.0.rows()
    }

    pub fn item_types(&self) -> usize {
        self.0.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

impl Deref for FractionalAllocation {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// The uniform-at-random allocation: every entry is `1/n`.
pub fn make_uar(n: usize, m: usize) -> Result<FractionalAllocation> {
    if n == 0 || m == 0 {
        return Err(Error::invalid(format!(
            "uniform allocation needs n >= 1 and m >= 1, got n={n}, m={m}"
        )));
    }
    Ok(FractionalAllocation(Matrix::filled(n, m, 1.0 / n as f64)))
}

/// Frobenius inner product `sum_{i,k} A_ik B_ik`.
pub fn frobenius_product(a: &Matrix, b: &Matrix) -> Result<f64> {
    a.ensure_same_shape(b)?;
    Ok(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum AllocationViolation {
    Entry { row: usize, col: usize, value: f64 },
    Column { col: usize, sum: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AllocationReport {
    pub violations: Vec<AllocationViolation>,
}

impl AllocationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for AllocationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| match v {
                AllocationViolation::Entry { row, col, value } => {
                    format!("entry ({row},{col}) = {value}")
                }
                AllocationViolation::Column { col, sum } => format!("column {col} sums {sum}"),
            })
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks entries lie in `[-tol, 1 + tol]` and every column sums to 1 within `tol`.
pub fn validate_allocation(x: &Matrix, tol: f64) -> AllocationReport {
    let mut report = AllocationReport::default();
    for i in 0..x.rows() {
        for k in 0..x.cols() {
            let v = x[(i, k)];
            if !(v >= -tol && v <= 1.0 + tol) {
                report.violations.push(AllocationViolation::Entry {
                    row: i,
                    col: k,
                    value: v,
                });
            }
        }
    }
    for k in 0..x.cols() {
        let sum = x.column_sum(k);
        if !((sum - 1.0).abs() <= tol) {
            report
                .violations
                .push(AllocationViolation::Column { col: k, sum });
        }
    }
    report
}
