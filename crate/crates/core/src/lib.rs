//! Online fair division of indivisible goods with unknown valuations.
//!
//! The crate provides fairness-constrained welfare LPs, slack transforms for
//! envy-freeness and proportionality in expectation, an explore-then-commit
//! bandit simulator, and brute-force oracles used to cross-check all of them.

// `!(x >= 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bandit;
pub mod constraints;
pub mod error;
pub mod experiment;
pub mod lp;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod transform;

pub use constraints::{
    all_satisfied, build_constraints, constraint_slack, transform_means_for_distribution,
    ConstraintSet, LinearConstraint,
};
pub use error::{Error, Result};
pub use matrix::{
    frobenius_product, make_uar, validate_allocation, AllocationReport, AllocationViolation,
    FractionalAllocation, Matrix, MeanMatrix,
};
pub use model::{ConfidenceBox, Family, ProblemSpec};

/// Tolerance for allocation validity and constraint feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Tolerance for comparing LP objective values.
pub const OBJECTIVE_TOL: f64 = 1e-6;

/// Largest supported player or item-type count.
pub const MAX_DIM: usize = 64;
