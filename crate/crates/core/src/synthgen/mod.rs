//! Synthetic call/SMS event streams with controllable temporal-edge
//! statistics.
//!
//! Ties are undirected pairs. Each tie follows a two-state chain over months:
//! an active tie stays active with probability `tie_persistence`, a dormant
//! tie wakes up with probability `reactivation_rate`. Ties present at the start
//! begin active with the chain's stationary probability; ties born later are
//! active in their birth month. Every active tie-month carries one call plus
//! overdispersed extra calls and SMS whose means depend on the sender's
//! demographic group.

mod calibrate;
mod config;
mod generate;

pub use calibrate::{calibrate, plan_indices, CalibrationReport, CalibrationTarget, Indices};
pub use config::{ActivityProfile, GenConfig, CONFIG_VERSION};
pub use generate::{generate, plan_ties, GenOutput, Tie, TiePlan};

use thiserror::Error;

#[derive(Error, Debug)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("unsupported config version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("calibration budget must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Graph(#[from] crate::graphstore::GraphError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
}

pub type Result<T> = std::result::Result<T, SynthError>;
