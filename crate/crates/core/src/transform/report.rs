use serde::Serialize;

use crate::matrix::FractionalAllocation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// The constraint holds with at least the requested slack.
    Slack,
    /// The constrained players receive identical rows.
    EqualRows,
    Violated,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintOutcome {
    pub label: String,
    pub slack: f64,
    pub outcome: Outcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// A class nobody is far from sheds mass to everyone else.
    Drain,
    /// Rows along a class cycle are blended with their successors.
    HalfShift,
    /// Only the threshold shrinks.
    Shrink,
    /// Classes on a cycle are averaged, then envy is removed.
    Merge,
    /// Proportional transform fell back to the uniform allocation.
    Uniform,
    /// Proportional transform redistributed surplus through the pot.
    Pot,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub branch: Branch,
    /// Threshold at the start of the iteration, in the caller's value units.
    pub alpha: f64,
    pub edges: usize,
    pub classes: usize,
    pub envy_removals: usize,
}

impl std::fmt::Display for IterationRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "iter={} branch={:?} alpha={:e} edges={} classes={}",
            self.iteration, self.branch, self.alpha, self.edges, self.classes
        )?;
        if self.envy_removals > 0 {
            write!(f, " removals={}", self.envy_removals)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransformReport {
    pub output: FractionalAllocation,
    pub gamma: f64,
    pub initial_alpha: f64,
    pub final_alpha: f64,
    pub iterations: usize,
    pub outcomes: Vec<ConstraintOutcome>,
    pub sw_loss: f64,
    pub clamp_events: usize,
    pub log: Vec<IterationRecord>,
}

impl TransformReport {
    pub fn all_hold(&self) -> bool {
        self.outcomes.iter().all(|o| o.outcome != Outcome::Violated)
    }
}
