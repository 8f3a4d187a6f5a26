//! The online allocation loop, its policies and metrics.

mod env;
mod episode;
mod estimate;
mod metrics;
mod policy;

pub use env::{Environment, ValueModel};
pub use episode::{run_episode, EpisodeTrace};
pub use estimate::{confidence_radius, estimate_means, EstimateState};
pub use metrics::{
    expected_regret, realized_envy, realized_prop_gap, realized_series, regret_against, FairnessSeries, Regret,
};
pub use policy::{
    etc_warmup_length, greedy_allocation, make_policy, EtcPolicy, Observation, OraclePolicy, Phase, Policy,
    PolicyKind, UarPolicy,
};
