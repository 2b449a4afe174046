//! Event ingestion, user filtering, monthly aggregation, normalization,
//! temporal splits and k-hop subgraph sampling.

mod aggregate;
pub mod container;
mod filter;
mod ingest;
mod khop;
mod normalize;
mod split;

pub use aggregate::aggregate_monthly;
pub use filter::{filter_users, FilterPolicy};
pub use ingest::{
    ingest, ingest_files, read_attrs_csv, read_events_csv, write_attrs_csv, write_events_csv,
    Diagnostic, Ingested, PairBucket, RawStore, ATTR_HEADER, EVENT_HEADER,
};
pub use khop::{sample_khop, sample_many, Subgraph, SubEdge, UnionGraph};
pub use normalize::{normalize, EdgeFeatures, NormStats, NormalizedGraph, EDGE_FEATURE_NAMES};
pub use split::{temporal_split, Split};

use chrono::{Datelike, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u64;

#[derive(Error, Debug)]
pub enum GraphError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("seed node {0} is not in the node universe")]
    UnknownSeed(NodeId),
    #[error("edge feature `{feature}` has zero variance on the training months")]
    ZeroVariance { feature: &'static str },
    #[error("training months contain no edges")]
    EmptyTraining,
    #[error("malformed graph container: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, GraphError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Kind {
    Call,
    Sms,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Outgoing,
    Incoming,
}

/// One call or SMS as logged from the ego's side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventRecord {
    pub ego: NodeId,
    pub alter: NodeId,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub kind: Kind,
    pub direction: Direction,
}

impl EventRecord {
    /// (sender, receiver) of the communication.
    pub fn sender_receiver(&self) -> (NodeId, NodeId) {
        match self.direction {
            Direction::Outgoing => (self.ego, self.alter),
            Direction::Incoming => (self.alter, self.ego),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    A,
    B,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::A => "A",
            Gender::B => "B",
        }
    }

    /// Binary encoding used as a model input.
    pub fn code(self) -> f64 {
        match self {
            Gender::A => 0.0,
            Gender::B => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeAttr {
    pub age: u32,
    pub gender: Gender,
    pub lat: f64,
    pub lon: f64,
}

/// Attribute row as read from disk; any field may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RawNodeAttr {
    pub age: Option<u32>,
    pub gender: Option<Gender>,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
}

impl RawNodeAttr {
    pub fn complete(&self) -> Option<NodeAttr> {
        Some(NodeAttr {
            age: self.age?,
            gender: self.gender?,
            lat: self.lat?,
            lon: self.lon?,
        })
    }
}

impl From<NodeAttr> for RawNodeAttr {
    fn from(a: NodeAttr) -> Self {
        RawNodeAttr {
            age: Some(a.age),
            gender: Some(a.gender),
            lat: Some(a.lat),
            lon: Some(a.lon),
        }
    }
}

/// Monthly counts on a directed edge (s, d): forward is s to d, backward is d to s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct EdgeAttr {
    pub calls_fwd: u32,
    pub sms_fwd: u32,
    pub calls_bwd: u32,
    pub sms_bwd: u32,
}

impl EdgeAttr {
    pub fn new(calls_fwd: u32, sms_fwd: u32, calls_bwd: u32, sms_bwd: u32) -> Self {
        EdgeAttr {
            calls_fwd,
            sms_fwd,
            calls_bwd,
            sms_bwd,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [
            f64::from(self.calls_fwd),
            f64::from(self.sms_fwd),
            f64::from(self.calls_bwd),
            f64::from(self.sms_bwd),
        ]
    }

    /// The same counts seen from the other endpoint.
    pub fn mirrored(&self) -> Self {
        EdgeAttr::new(self.calls_bwd, self.sms_bwd, self.calls_fwd, self.sms_fwd)
    }

    pub fn total(&self) -> u64 {
        u64::from(self.calls_fwd)
            + u64::from(self.sms_fwd)
            + u64::from(self.calls_bwd)
            + u64::from(self.sms_bwd)
    }
}

/// Calendar-month observation window in UTC. Month indices run 1..=months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub start_year: i32,
    /// 1..=12
    pub start_month: u32,
    pub months: usize,
}

impl Default for ObservationWindow {
    fn default() -> Self {
        ObservationWindow {
            start_year: 2007,
            start_month: 1,
            months: 36,
        }
    }
}

impl ObservationWindow {
    pub fn new(start_year: i32, start_month: u32, months: usize) -> Self {
        ObservationWindow {
            start_year,
            start_month,
            months,
        }
    }

    /// 1-based month index of a timestamp, or `None` outside the window.
    pub fn month_of(&self, timestamp: i64) -> Option<usize> {
        let dt = Utc.timestamp_opt(timestamp, 0).single()?;
        let offset = (i64::from(dt.year()) - i64::from(self.start_year)) * 12
            + i64::from(dt.month()) - i64::from(self.start_month);
        if offset < 0 || offset >= self.months as i64 {
            return None;
        }
        Some(offset as usize + 1)
    }

    /// (year, calendar month 1..=12) of a month index.
    pub fn calendar(&self, month: usize) -> (i32, u32) {
        let zero_based = (self.start_month as i64 - 1) + month as i64 - 1;
        (
            self.start_year + zero_based.div_euclid(12) as i32,
            zero_based.rem_euclid(12) as u32 + 1,
        )
    }

    /// Unix timestamp of the first second of a month index (may be `months + 1`).
    pub fn month_start(&self, month: usize) -> i64 {
        let (y, m) = self.calendar(month);
        Utc.with_ymd_and_hms(y, m, 1, 0, 0, 0)
            .single()
            .expect("valid calendar month")
            .timestamp()
    }

    /// Calendar years touched by the window, ascending.
    pub fn years(&self) -> Vec<i32> {
        if self.months == 0 {
            return Vec::new();
        }
        let first = self.calendar(1).0;
        let last = self.calendar(self.months).0;
        (first..=last).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub attr: NodeAttr,
}

/// Directed edge between node indices (positions in `TemporalGraph::nodes`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: u32,
    pub dst: u32,
    pub attr: EdgeAttr,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Snapshot {
    /// 1-based.
    pub month: usize,
    /// Sorted by (src, dst), at most one record per ordered pair.
    pub edges: Vec<Edge>,
}

impl Snapshot {
    pub fn find(&self, src: u32, dst: u32) -> Option<usize> {
        self.edges
            .binary_search_by(|e| (e.src, e.dst).cmp(&(src, dst)))
            .ok()
    }

    /// Range of edge positions whose source is `src`.
    pub fn out_range(&self, src: u32) -> std::ops::Range<usize> {
        let lo = self.edges.partition_point(|e| e.src < src);
        let hi = self.edges.partition_point(|e| e.src <= src);
        lo..hi
    }
}

/// Ordered monthly snapshots over a shared node universe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalGraph {
    pub window: ObservationWindow,
    /// Sorted by id.
    pub nodes: Vec<Node>,
    /// `snapshots[t - 1]` holds month `t`.
    pub snapshots: Vec<Snapshot>,
}

impl TemporalGraph {
    /// Builds a graph from explicit per-month edge lists, sorting and
    /// de-duplicating (later duplicates win).
    pub fn from_parts(
        window: ObservationWindow,
        mut nodes: Vec<Node>,
        months: Vec<Vec<Edge>>,
    ) -> Self {
        nodes.sort_by_key(|n| n.id);
        let snapshots = months
            .into_iter()
            .enumerate()
            .map(|(i, mut edges)| {
                edges.reverse();
                edges.sort_by_key(|e| (e.src, e.dst));
                edges.dedup_by_key(|e| (e.src, e.dst));
                Snapshot {
                    month: i + 1,
                    edges,
                }
            })
            .collect();
        TemporalGraph {
            window,
            nodes,
            snapshots,
        }
    }

    pub fn months(&self) -> usize {
        self.snapshots.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, id: NodeId) -> Option<usize> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok()
    }

    /// Snapshot of a 1-based month.
    pub fn snapshot(&self, month: usize) -> &Snapshot {
        &self.snapshots[month - 1]
    }

    pub fn temporal_edge_count(&self) -> usize {
        self.snapshots.iter().map(|s| s.edges.len()).sum()
    }

    pub fn calendar_month(&self, month: usize) -> u32 {
        self.window.calendar(month).1
    }
}
