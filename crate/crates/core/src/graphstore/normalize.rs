use log::warn;
use serde::{Deserialize, Serialize};

use super::{GraphError, Result, Split, TemporalGraph};

pub const EDGE_FEATURE_NAMES: [&str; 4] = ["calls_fwd", "sms_fwd", "calls_bwd", "sms_bwd"];

/// Per-month standardized edge features, aligned with `Snapshot::edges`.
pub type EdgeFeatures = Vec<Vec<[f64; 4]>>;

/// Normalization constants. Node ranges come from all nodes; edge moments
/// from training months only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub age_range: (f64, f64),
    pub lat_range: (f64, f64),
    pub lon_range: (f64, f64),
    pub edge_mean: [f64; 4],
    pub edge_std: [f64; 4],
}

impl NormStats {
    pub fn standardize(&self, raw: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|k| (raw[k] - self.edge_mean[k]) / self.edge_std[k])
    }

    pub fn destandardize(&self, z: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|k| z[k] * self.edge_std[k] + self.edge_mean[k])
    }

    /// Exact equality of every constant, used to reject mismatched checkpoints.
    pub fn same_as(&self, other: &NormStats) -> bool {
        self.fingerprint() == other.fingerprint()
    }

    pub fn fingerprint(&self) -> [u64; 14] {
        let v = [
            self.age_range.0,
            self.age_range.1,
            self.lat_range.0,
            self.lat_range.1,
            self.lon_range.0,
            self.lon_range.1,
            self.edge_mean[0],
            self.edge_mean[1],
            self.edge_mean[2],
            self.edge_mean[3],
            self.edge_std[0],
            self.edge_std[1],
            self.edge_std[2],
            self.edge_std[3],
        ];
        v.map(f64::to_bits)
    }
}

/// Model-ready features. Raw counts stay in the source graph as targets.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGraph {
    /// Row per node: [gender in {0,1}, age, lat, lon], the last three in [-1, 1].
    pub node_features: Vec<[f64; 4]>,
    pub edge_features: EdgeFeatures,
    pub stats: NormStats,
}

fn to_unit_range(x: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        2.0 * (x - lo) / (hi - lo) - 1.0
    } else {
        0.0
    }
}

fn range(values: impl Iterator<Item = f64>, name: &str) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !(hi > lo) {
        warn!("node feature `{name}` is constant; normalizing it to 0");
    }
    (lo, hi)
}

pub fn normalize(graph: &TemporalGraph, split: &Split) -> Result<NormalizedGraph> {
    let age_range = range(graph.nodes.iter().map(|n| f64::from(n.attr.age)), "age");
    let lat_range = range(graph.nodes.iter().map(|n| n.attr.lat), "lat");
    let lon_range = range(graph.nodes.iter().map(|n| n.attr.lon), "lon");

    let train: Vec<[f64; 4]> = graph
        .snapshots
        .iter()
        .filter(|s| s.month <= split.train_cutoff)
        .flat_map(|s| s.edges.iter().map(|e| e.attr.as_array()))
        .collect();
    if train.is_empty() {
        return Err(GraphError::EmptyTraining);
    }
    let n = train.len() as f64;
    let mut edge_mean = [0.0; 4];
    let mut edge_std = [0.0; 4];
    for k in 0..4 {
        let mean = train.iter().map(|r| r[k]).sum::<f64>() / n;
        let var = train.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
        if !(var > 0.0) {
            return Err(GraphError::ZeroVariance {
                feature: EDGE_FEATURE_NAMES[k],
            });
        }
        edge_mean[k] = mean;
        edge_std[k] = var.sqrt();
    }
    let stats = NormStats {
        age_range,
        lat_range,
        lon_range,
        edge_mean,
        edge_std,
    };

    let node_features = graph
        .nodes
        .iter()
        .map(|n| {
            [
                n.attr.gender.code(),
                to_unit_range(f64::from(n.attr.age), age_range),
                to_unit_range(n.attr.lat, lat_range),
                to_unit_range(n.attr.lon, lon_range),
            ]
        })
        .collect();
    let edge_features = graph
        .snapshots
        .iter()
        .map(|s| {
            s.edges
                .iter()
                .map(|e| stats.standardize(e.attr.as_array()))
                .collect()
        })
        .collect();
    Ok(NormalizedGraph {
        node_features,
        edge_features,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphstore::{Edge, EdgeAttr, Gender, Node, NodeAttr, ObservationWindow};

    fn node(id: u64, age: u32, lat: f64) -> Node {
        Node {
            id,
            attr: NodeAttr {
                age,
                gender: if id % 2 == 0 { Gender::A } else { Gender::B },
                lat,
                lon: 20.0 + id as f64,
            },
        }
    }

    fn graph(lat_constant: bool) -> TemporalGraph {
        let nodes = vec![
            node(1, 18, 60.0),
            node(2, 40, if lat_constant { 60.0 } else { 61.0 }),
            node(3, 65, if lat_constant { 60.0 } else { 62.0 }),
        ];
        let e = |s, d, c, m| Edge {
            src: s,
            dst: d,
            attr: EdgeAttr::new(c, m, c + 1, m * 2),
        };
        TemporalGraph::from_parts(
            ObservationWindow::new(2007, 1, 6),
            nodes,
            vec![
                vec![e(0, 1, 3, 1), e(1, 0, 1, 2)],
                vec![e(1, 2, 5, 0)],
                vec![e(2, 0, 2, 4)],
                vec![e(0, 2, 9, 9)],
                vec![],
                vec![e(0, 1, 100, 100)],
            ],
        )
    }

    #[test]
    fn node_features_in_range() {
        let split = Split::default_for(6).unwrap();
        let ng = normalize(&graph(false), &split).unwrap();
        assert_eq!(ng.node_features[2][1], 1.0);
        assert_eq!(ng.node_features[0][1], -1.0);
        for row in &ng.node_features {
            assert!(row[0] == 0.0 || row[0] == 1.0);
            assert!(row[1..].iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let split = Split::default_for(6).unwrap();
        let ng = normalize(&graph(true), &split).unwrap();
        assert!(ng.node_features.iter().all(|r| r[2] == 0.0));
    }

    #[test]
    fn edge_moments_use_training_months_only() {
        let g = graph(false);
        let split = Split::default_for(6).unwrap();
        let ng = normalize(&g, &split).unwrap();
        // months 1..=4: calls_fwd values 3, 1, 5, 2, 9
        let mean = (3.0 + 1.0 + 5.0 + 2.0 + 9.0) / 5.0;
        assert!((ng.stats.edge_mean[0] - mean).abs() < 1e-12);
        // A value equal to the training mean standardizes to zero.
        assert_eq!(ng.stats.standardize([mean, 0.0, 0.0, 0.0])[0], 0.0);
        let raw = g.snapshot(6).edges[0].attr.as_array();
        let back = ng.stats.destandardize(ng.edge_features[5][0]);
        for k in 0..4 {
            assert!((back[k] - raw[k]).abs() <= 1e-9 * raw[k].abs().max(1.0));
        }
    }

    #[test]
    fn zero_variance_names_the_feature() {
        let nodes = vec![node(1, 20, 1.0), node(2, 30, 2.0)];
        let e = Edge {
            src: 0,
            dst: 1,
            attr: EdgeAttr::new(2, 0, 1, 3),
        };
        let g = TemporalGraph::from_parts(
            ObservationWindow::new(2007, 1, 6),
            nodes,
            vec![vec![e], vec![e], vec![], vec![], vec![], vec![]],
        );
        let err = normalize(&g, &Split::default_for(6).unwrap()).unwrap_err();
        assert!(matches!(err, GraphError::ZeroVariance { feature: "calls_fwd" }));
    }
}
