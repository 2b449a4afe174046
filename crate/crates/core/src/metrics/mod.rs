//! Temporal-edge statistics (novelty, reoccurrence, surprise, TEA and TET
//! layouts), MAE evaluation with stratification, and the Wilcoxon
//! signed-rank test.

pub(crate) mod indices;
pub mod io;
mod layout;
mod mae;
mod wilcoxon;

pub use indices::{novelty, reoccurrence, surprise, EdgeKey};
pub use layout::{tea_series, tet_layout, EdgeClass, TeaMonth, TeaSeries, TetLayout, TetRow};
pub use mae::{
    age_group, mae, stratified_mae, ChannelStats, EdgeSet, EvalRecord, EvalReport, SetSummary,
    StrataCell, StrataScheme, StrataTable, AGE_GROUPS,
};
pub use wilcoxon::{normal_cdf, wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult};

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MetricsError {
    #[error("graph has no edges")]
    NoEdges,
    #[error("cutoff {cutoff} outside 1..{months}")]
    BadCutoff { cutoff: usize, months: usize },
    #[error("no development edges before the cutoff")]
    EmptyDev,
    #[error("no test edges after the cutoff")]
    EmptyTest,
    #[error("length mismatch: {0} predictions vs {1} truths")]
    LengthMismatch(usize, usize),
    #[error("no values to average")]
    Empty,
    #[error("need at least 5 non-zero differences, found {0}")]
    TooFewDifferences(usize),
}

pub type Result<T> = std::result::Result<T, MetricsError>;
