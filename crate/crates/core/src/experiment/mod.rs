//! Experiment orchestration: configs, seeded runs, CSV traces, summaries,
//! slope fits, randomized verification suites and the lower-bound demo.

mod config;
mod demo;
mod run;
mod slope;
pub mod suites;

pub use config::{ExperimentConfig, MeanSource};
pub use demo::{demo_lower_bound, lower_bound_instances, CoordinateRange, LowerBoundReport, ZERO_SURROGATE};
pub use run::{
    mean_regret_by_horizon, run_config, run_single, thread_pool, trace_csv, trace_file_name, write_atomic,
    HorizonMean, RunResult, RunSummary, SummaryReport, CSV_COLUMNS,
};
pub use slope::{fit_regret_slope, SlopeFit};
