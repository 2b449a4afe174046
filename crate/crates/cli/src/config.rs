//! Pipeline configuration file. Every section is optional; command-line
//! flags are applied after the file and win over it.

use std::path::{Path, PathBuf};

use callnet_core::graphstore::{temporal_split, FilterPolicy, Split};
use callnet_core::models::{AggregationKind, Architecture, ModelConfig};
use callnet_core::synthgen::GenConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, IoContext, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data_dir: Option<PathBuf>,
    pub run_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train_cutoff: Option<usize>,
    pub val_cutoff: Option<usize>,
}

/// Overrides on top of an architecture's published defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub architecture: Architecture,
    pub hidden_dim: Option<usize>,
    pub chebyshev_k: Option<usize>,
    pub learning_rate: Option<f64>,
    pub pos_weight: Option<f64>,
    pub neg_weight: Option<f64>,
    pub neg_ratio: Option<usize>,
    pub patience: Option<usize>,
    pub batch_subgraphs: Option<usize>,
    pub max_epochs: Option<usize>,
    pub khop: Option<usize>,
    pub edge_mlp_hidden: Option<usize>,
    pub aggregation: Option<AggregationKind>,
    pub readout_hidden: Option<usize>,
    pub max_seeds: Option<usize>,
}

impl ModelSection {
    pub fn resolve(&self) -> ModelConfig {
        let mut c = ModelConfig::defaults(self.architecture);
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        take!(
            hidden_dim,
            chebyshev_k,
            learning_rate,
            pos_weight,
            neg_weight,
            neg_ratio,
            patience,
            batch_subgraphs,
            max_epochs,
            khop,
            edge_mlp_hidden,
            aggregation,
            readout_hidden
        );
        c.max_seeds = self.max_seeds.or(c.max_seeds);
        c
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub neg_ratio: Option<usize>,
    pub khop: Option<usize>,
    pub max_seeds: Option<usize>,
    /// rEdgeBank window; tuned on the validation months when absent.
    pub window: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub generator: Option<GenConfig>,
    pub filter: FilterPolicy,
    pub split: SplitSection,
    pub models: Vec<ModelSection>,
    pub evaluation: EvalSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        let cfg: PipelineConfig = toml::from_str(&text).map_err(|source| CliError::ConfigParse {
            path: path.into(),
            source,
        })?;
        if let Some(g) = &cfg.generator {
            g.validate()?;
        }
        Ok(cfg)
    }

    pub fn split_for(&self, months: usize) -> Result<Split> {
        let default = Split::default_for(months)?;
        Ok(temporal_split(
            months,
            self.split.train_cutoff.unwrap_or(default.train_cutoff),
            self.split.val_cutoff.unwrap_or(default.val_cutoff),
            months,
        )?)
    }

    /// The model section for `arch`, or the published defaults.
    pub fn model(&self, arch: Architecture) -> ModelConfig {
        self.models
            .iter()
            .find(|m| m.architecture == arch)
            .map_or_else(|| ModelConfig::defaults(arch), ModelSection::resolve)
    }
}
