//! File layout of data and run directories.
//!
//! Data directory: `events.csv`, `attributes.csv`, `generator.toml`,
//! `calibration.toml` (with `--calibrate`), `graph.cntg`, `indices.csv`,
//! `tea.csv`, `tet.csv`.
//!
//! Run directory: `run.toml`, `curves.csv` (`epoch,train_loss,val_mae`),
//! `checkpoint.cnck`, `report.csv`, `by_month.csv`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use callnet_core::graphstore::{
    aggregate_monthly, container::read_graph, filter_users, ingest_files, FilterPolicy, NormStats, ObservationWindow, Split,
    TemporalGraph,
};
use callnet_core::models::ModelConfig;
use callnet_core::synthgen::GenConfig;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, IoContext, Result};

pub const EVENTS: &str = "events.csv";
pub const ATTRIBUTES: &str = "attributes.csv";
pub const GENERATOR: &str = "generator.toml";
pub const CALIBRATION: &str = "calibration.toml";
pub const GRAPH: &str = "graph.cntg";
pub const RUN: &str = "run.toml";
pub const CURVES: &str = "curves.csv";
pub const CHECKPOINT: &str = "checkpoint.cnck";
pub const REPORT: &str = "report.csv";
pub const COMPARISON: &str = "comparison.csv";
pub const WILCOXON: &str = "wilcoxon.csv";

/// Writes `path` through `f`, creating parent directories.
pub fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).at(dir)?;
    }
    let mut w = BufWriter::new(File::create(path).at(path)?);
    f(&mut w)?;
    w.flush().at(path)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_with(path, |w| w.write_all(text.as_bytes()).at(path))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).at(path)?))
}

pub fn to_toml<T: Serialize>(what: &'static str, v: &T) -> Result<String> {
    toml::to_string(v).map_err(|source| CliError::ConfigWrite { what, source })
}

pub fn from_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).at(path)?;
    toml::from_str(&text).map_err(|source| CliError::ConfigParse {
        path: path.into(),
        source,
    })
}

/// Generator settings recorded next to the data, if any.
pub fn recorded_generator(data_dir: &Path) -> Result<Option<GenConfig>> {
    let p = data_dir.join(GENERATOR);
    if !p.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&p).at(&p)?;
    Ok(Some(GenConfig::from_toml(&text)?))
}

/// Filters and aggregates the CSV events of `data_dir`.
pub fn build_graph(data_dir: &Path, window: ObservationWindow, policy: &FilterPolicy) -> Result<TemporalGraph> {
    let ing = ingest_files(data_dir.join(EVENTS), data_dir.join(ATTRIBUTES), window)?;
    if !ing.diagnostics.is_empty() {
        warn!("{} input rows rejected; first: {:?}", ing.diagnostics.len(), ing.diagnostics[0]);
    }
    let store = filter_users(&ing.store, policy);
    info!(
        "{} of {} users kept after filtering",
        store.attrs.len(),
        ing.store.attrs.len()
    );
    Ok(aggregate_monthly(&store))
}

/// The aggregated graph written by `stats`, or one built from the CSVs.
pub fn load_graph(data_dir: &Path, window: ObservationWindow, policy: &FilterPolicy) -> Result<TemporalGraph> {
    let p = data_dir.join(GRAPH);
    if p.exists() {
        return Ok(read_graph(open(&p)?)?.0);
    }
    build_graph(data_dir, window, policy)
}

/// Snapshot of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    /// Architecture name, or `redgebank`.
    pub architecture: String,
    pub seed: u64,
    pub window: Option<usize>,
    pub best_epoch: Option<usize>,
    pub eval_khop: usize,
    pub eval_neg_ratio: usize,
    pub split: Split,
    pub norm: NormStats,
    pub model: Option<ModelConfig>,
}

impl RunFile {
    pub fn load(run_dir: &Path) -> Result<Self> {
        from_toml(&run_dir.join(RUN))
    }

    pub fn path(run_dir: &Path) -> PathBuf {
        run_dir.join(RUN)
    }
}
