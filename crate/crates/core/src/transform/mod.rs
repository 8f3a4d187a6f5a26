//! Transforms that turn an optimal fair allocation into one whose fairness
//! constraints hold with a margin, at small welfare cost.

mod efe;
mod graph;
mod ops;
mod proportional;
mod remove_envy;
mod report;
mod scalar;

pub use efe::{efe_gamma_max, efe_slack_transform, efe_slack_transform_observed, efe_slack_transform_with_alpha};
pub use graph::{build_envy_slack_graph, equivalence_classes, Edge, EnvySlackGraph, EquivalenceClasses};
pub use ops::{average_clique, drain_sink_class, half_shift_cycle, mass_transfer, min_slack_class_cycle};
pub use proportional::proportional_slack_transform;
pub use remove_envy::remove_envy;
pub use report::{Branch, ConstraintOutcome, IterationRecord, Outcome, TransformReport};
pub use scalar::Scalar;
