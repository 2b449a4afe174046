//! The four temporal GNN architectures, the training harness and the
//! evaluation driver shared with the memorization baseline.

mod arch;
mod config;
mod data;
mod eval;
mod loss;
mod train;

pub use arch::{ForwardOut, Mode, Model};
pub use config::{AggregationKind, Architecture, ModelConfig};
pub use data::{month_queries, Dataset, Query, QuerySet, SubgraphSeq};
pub use eval::{eval_queries, evaluate, evaluate_redgebank, predict_records, EvalOptions, Predictor};
pub use loss::{gaussian_kl, gaussian_nll, mse_loss, weighted_se_sum, LossWeights};
pub use train::{subgraph_loss, train, EpochStats, SubgraphLoss, TrainedModel};

use thiserror::Error;

#[derive(Error, Debug)]
pub enum ModelsError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("unknown architecture `{0}`")]
    UnknownArchitecture(String),
    #[error("query ({src}, {dst}) lies outside the {n}-node subgraph")]
    QueryOutOfSubgraph { src: usize, dst: usize, n: usize },
    #[error("normalization statistics differ from the ones the model was trained with")]
    NormStatsMismatch,
    #[error("non-finite loss at epoch {epoch}, batch {batch}; parameter norms: {norms}")]
    NanLoss {
        epoch: usize,
        batch: usize,
        norms: String,
    },
    #[error("length mismatch: {0} predictions vs {1} targets")]
    LengthMismatch(usize, usize),
    #[error("no test edges to evaluate")]
    NoTestEdges,
    #[error("no training seeds")]
    NoTrainingSeeds,
    #[error(transparent)]
    Graph(#[from] crate::graphstore::GraphError),
    #[error(transparent)]
    Neural(#[from] crate::neural::NeuralError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    EdgeBank(#[from] crate::edgebank::EdgeBankError),
}

pub type Result<T> = std::result::Result<T, ModelsError>;
