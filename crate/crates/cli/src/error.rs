use std::path::PathBuf;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    ConfigParse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("cannot serialize {what}: {source}")]
    ConfigWrite {
        what: &'static str,
        source: toml::ser::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("run {run}: normalization statistics differ from the dataset's")]
    NormMismatch { run: PathBuf },
    #[error("runs pose different queries; evaluate them with the same options")]
    UnpairedRuns,
    #[error(transparent)]
    Graph(#[from] callnet_core::graphstore::GraphError),
    #[error(transparent)]
    Synth(#[from] callnet_core::synthgen::SynthError),
    #[error(transparent)]
    Models(#[from] callnet_core::models::ModelsError),
    #[error(transparent)]
    Neural(#[from] callnet_core::neural::NeuralError),
    #[error(transparent)]
    Metrics(#[from] callnet_core::metrics::MetricsError),
    #[error(transparent)]
    EdgeBank(#[from] callnet_core::edgebank::EdgeBankError),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attaches the path to an I/O error.
pub trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| CliError::Io {
            path: path.into(),
            source,
        })
    }
}
