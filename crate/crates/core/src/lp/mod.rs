//! Linear programming: a dense simplex core and the fairness-constrained
//! welfare programs built on it.

mod fair;
mod format;
mod simplex;

pub use fair::{
    add_constraint_rows, allocation_program, build_fair_lp, build_interval_lp, build_robust_lp,
    robust_slack, solve_optimal_fair, solve_robust_fair, solve_robust_fair_intervals, FairSolution,
};
pub use format::to_lp_format;
pub use simplex::{solve_lp, LpOutcome, LpRow, LpStatus, Sense, StandardLP};
