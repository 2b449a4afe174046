use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ModelsError, Result};
use crate::neural::Aggregation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Gcrn,
    Vgrnn,
    Dysat,
    Roland,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::Gcrn,
        Architecture::Vgrnn,
        Architecture::Dysat,
        Architecture::Roland,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Gcrn => "gcrn",
            Architecture::Vgrnn => "vgrnn",
            Architecture::Dysat => "dysat",
            Architecture::Roland => "roland",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = ModelsError;
    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| ModelsError::UnknownArchitecture(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationKind {
    Mean,
    Max,
}

impl From<AggregationKind> for Aggregation {
    fn from(a: AggregationKind) -> Self {
        match a {
            AggregationKind::Mean => Aggregation::Mean,
            AggregationKind::Max => Aggregation::Max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub hidden_dim: usize,
    pub chebyshev_k: usize,
    pub learning_rate: f64,
    /// Weight of positive-edge squared errors in the loss.
    pub pos_weight: f64,
    /// Weight of negative-edge squared errors in the loss.
    pub neg_weight: f64,
    /// Random negatives per positive edge and seed.
    pub neg_ratio: usize,
    pub patience: usize,
    pub batch_subgraphs: usize,
    pub max_epochs: usize,
    pub rng_seed: u64,
    /// Radius of the subgraph around each seed.
    pub khop: usize,
    pub edge_mlp_hidden: usize,
    pub aggregation: AggregationKind,
    /// Width of the readout MLP hidden layer.
    pub readout_hidden: usize,
    /// Caps the number of seeds per phase (a deterministic subset); `None` uses all.
    pub max_seeds: Option<usize>,
}

impl ModelConfig {
    /// Published settings per architecture.
    pub fn defaults(architecture: Architecture) -> Self {
        let (hidden_dim, learning_rate) = match architecture {
            Architecture::Gcrn => (176, 3e-4),
            Architecture::Vgrnn => (176, 3e-4),
            Architecture::Dysat => (89, 3e-4),
            Architecture::Roland => (160, 3e-5),
        };
        ModelConfig {
            architecture,
            hidden_dim,
            chebyshev_k: 3,
            learning_rate,
            pos_weight: 1.0,
            neg_weight: 1.0,
            neg_ratio: 10,
            patience: 20,
            batch_subgraphs: 100,
            max_epochs: 200,
            rng_seed: 0,
            khop: 3,
            edge_mlp_hidden: 16,
            aggregation: AggregationKind::Mean,
            readout_hidden: 64,
            max_seeds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelsError::InvalidConfig(m));
        if self.hidden_dim == 0 || self.edge_mlp_hidden == 0 || self.readout_hidden == 0 {
            return bad("dimensions must be positive".into());
        }
        if self.chebyshev_k == 0 {
            return bad("chebyshev_k must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate = {} must be > 0", self.learning_rate));
        }
        if !(self.pos_weight >= 0.0 && self.neg_weight >= 0.0) {
            return bad("loss weights must be >= 0".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.batch_subgraphs == 0 {
            return bad("batch_subgraphs must be at least 1".into());
        }
        if self.khop == 0 {
            return bad("khop must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_defaults() {
        let r = ModelConfig::defaults(Architecture::Roland);
        assert_eq!((r.hidden_dim, r.learning_rate), (160, 3e-5));
        let g = ModelConfig::defaults(Architecture::Gcrn);
        assert_eq!((g.hidden_dim, g.chebyshev_k, g.learning_rate), (176, 3, 3e-4));
        assert_eq!(ModelConfig::defaults(Architecture::Dysat).hidden_dim, 89);
        assert_eq!(ModelConfig::defaults(Architecture::Vgrnn).hidden_dim, 176);
        assert_eq!((g.patience, g.batch_subgraphs, g.neg_ratio), (20, 100, 10));
    }

    #[test]
    fn names_round_trip() {
        for a in Architecture::ALL {
            assert_eq!(a.as_str().parse::<Architecture>().unwrap(), a);
        }
        assert!("gat".parse::<Architecture>().is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let mut c = ModelConfig::defaults(Architecture::Gcrn);
        c.hidden_dim = 0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::defaults(Architecture::Gcrn);
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
    }
}
