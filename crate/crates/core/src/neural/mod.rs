//! Dense reverse-mode autodiff and the graph layers built on it.

mod checkpoint;
pub mod gradcheck;
pub mod layers;
mod params;
mod tape;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use layers::*;
pub use params::{uniform_fan_in, uniform_with_fan, Adam, Bound, Param, ParamId, ParamStore};
pub use tape::{concat_cols, concat_rows, Mat, Tape, Tensor};

use thiserror::Error;

#[derive(Error, Debug)]
pub enum NeuralError {
    #[error("backward needs a 1x1 loss, got {0}x{1}")]
    NonScalarLoss(usize, usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("negative adjacency weight at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NeuralError>;
