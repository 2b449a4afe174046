use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graphstore::{NodeId, TemporalGraph};

/// Where an edge lives relative to the development/test cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeClass {
    TrainOnly,
    Transductive,
    Inductive,
}

impl EdgeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeClass::TrainOnly => "train_only",
            EdgeClass::Transductive => "transductive",
            EdgeClass::Inductive => "inductive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeaMonth {
    pub month: usize,
    pub novel: usize,
    pub reoccurring: usize,
}

/// Per-month split of edges into first-seen and previously seen.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TeaSeries {
    pub months: Vec<TeaMonth>,
}

pub fn tea_series(graph: &TemporalGraph) -> TeaSeries {
    let mut seen = std::collections::HashSet::new();
    let months = graph
        .snapshots
        .iter()
        .map(|snap| {
            let novel = snap
                .edges
                .iter()
                .filter(|e| !seen.contains(&(e.src, e.dst)))
                .count();
            seen.extend(snap.edges.iter().map(|e| (e.src, e.dst)));
            TeaMonth {
                month: snap.month,
                novel,
                reoccurring: snap.edges.len() - novel,
            }
        })
        .collect();
    TeaSeries { months }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TetRow {
    pub src: NodeId,
    pub dst: NodeId,
    pub first: usize,
    pub last: usize,
    pub class: EdgeClass,
}

/// Distinct edges grouped by first month, then ordered by last month, ties by
/// (src, dst) node id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TetLayout {
    pub cutoff: usize,
    pub rows: Vec<TetRow>,
}

pub fn tet_layout(graph: &TemporalGraph, cutoff: usize) -> TetLayout {
    // key: (src id, dst id) -> (first, last, in_dev, in_test)
    let mut spans: BTreeMap<(NodeId, NodeId), (usize, usize, bool, bool)> = BTreeMap::new();
    for snap in &graph.snapshots {
        let t = snap.month;
        for e in &snap.edges {
            let key = (graph.nodes[e.src as usize].id, graph.nodes[e.dst as usize].id);
            let s = spans.entry(key).or_insert((t, t, false, false));
            s.0 = s.0.min(t);
            s.1 = s.1.max(t);
            if t <= cutoff {
                s.2 = true;
            } else {
                s.3 = true;
            }
        }
    }
    let mut rows: Vec<TetRow> = spans
        .into_iter()
        .map(|((src, dst), (first, last, dev, test))| TetRow {
            src,
            dst,
            first,
            last,
            class: match (dev, test) {
                (true, false) => EdgeClass::TrainOnly,
                (true, true) => EdgeClass::Transductive,
                _ => EdgeClass::Inductive,
            },
        })
        .collect();
    rows.sort_by_key(|r| (r.first, r.last, r.src, r.dst));
    TetLayout { cutoff, rows }
}
