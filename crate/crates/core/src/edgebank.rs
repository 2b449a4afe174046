//! Memorization baselines: windowed-mean regression of edge counts
//! (rEdgeBank) and binary edge existence (EdgeBank).

use std::collections::HashMap;

use thiserror::Error;

use crate::graphstore::{EdgeAttr, Snapshot, TemporalGraph};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum EdgeBankError {
    #[error("window must be at least 1, got {0}")]
    BadWindow(usize),
    #[error("query month {t} is beyond frontier {frontier} + 1")]
    BeyondFrontier { t: usize, frontier: usize },
    #[error("snapshot month {got} does not extend frontier {frontier}")]
    NonContiguous { got: usize, frontier: usize },
    #[error("no candidate windows")]
    NoCandidates,
    #[error("no positive edges in the validation months")]
    EmptyValidation,
}

pub type Result<T> = std::result::Result<T, EdgeBankError>;

/// Per ordered pair, the (month, counts) observations up to the frontier.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeHistory {
    frontier: usize,
    observations: HashMap<(u32, u32), Vec<(usize, EdgeAttr)>>,
}

impl EdgeHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// History of months `1..=frontier`.
    pub fn from_graph(graph: &TemporalGraph, frontier: usize) -> Self {
        let mut h = Self::new();
        for snap in graph.snapshots.iter().take(frontier) {
            h.advance(snap).expect("snapshots are contiguous");
        }
        h
    }

    pub fn frontier(&self) -> usize {
        self.frontier
    }

    /// Appends the next month.
    pub fn advance(&mut self, snapshot: &Snapshot) -> Result<()> {
        if snapshot.month != self.frontier + 1 {
            return Err(EdgeBankError::NonContiguous {
                got: snapshot.month,
                frontier: self.frontier,
            });
        }
        for e in &snapshot.edges {
            self.observations
                .entry((e.src, e.dst))
                .or_default()
                .push((snapshot.month, e.attr));
        }
        self.frontier = snapshot.month;
        Ok(())
    }

    pub fn observations(&self, pair: (u32, u32)) -> &[(usize, EdgeAttr)] {
        self.observations.get(&pair).map_or(&[], Vec::as_slice)
    }

    /// Observations with month in `[t - w, t - 1]`.
    fn window(&self, pair: (u32, u32), t: usize, w: usize) -> &[(usize, EdgeAttr)] {
        let obs = self.observations(pair);
        let lo = obs.partition_point(|(m, _)| *m + w < t);
        let hi = obs.partition_point(|(m, _)| *m < t);
        &obs[lo..hi]
    }

    fn pairs(&self) -> impl Iterator<Item = (&(u32, u32), &Vec<(usize, EdgeAttr)>)> {
        self.observations.iter()
    }
}

fn check_query(history: &EdgeHistory, t: usize) -> Result<()> {
    if t > history.frontier + 1 {
        return Err(EdgeBankError::BeyondFrontier {
            t,
            frontier: history.frontier,
        });
    }
    Ok(())
}

/// Mean counts of `pair` over the months in `[t - w, t - 1]` where it was
/// present; all zeros when it was never present in the window.
pub fn redgebank_predict(
    history: &EdgeHistory,
    pair: (u32, u32),
    t: usize,
    w: usize,
) -> Result<[f64; 4]> {
    if w < 1 {
        return Err(EdgeBankError::BadWindow(w));
    }
    check_query(history, t)?;
    let obs = history.window(pair, t, w);
    if obs.is_empty() {
        return Ok([0.0; 4]);
    }
    let mut sum = [0.0; 4];
    for (_, a) in obs {
        for (s, v) in sum.iter_mut().zip(a.as_array()) {
            *s += v;
        }
    }
    Ok(sum.map(|s| s / obs.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Memory {
    Unlimited,
    Window(usize),
}

/// Whether `pair` was observed before month `t` within the memory span.
pub fn edgebank_exists(history: &EdgeHistory, pair: (u32, u32), t: usize, memory: Memory) -> bool {
    match memory {
        Memory::Unlimited => history
            .observations(pair)
            .first()
            .is_some_and(|(m, _)| *m < t),
        Memory::Window(w) => !history.window(pair, t, w).is_empty(),
    }
}

/// Window minimizing the mean of call and SMS MAE over positive edges in
/// `months`; ties go to the smaller window. `history` must cover `months`.
pub fn tune_window(
    history: &EdgeHistory,
    months: std::ops::RangeInclusive<usize>,
    candidates: &[usize],
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(EdgeBankError::NoCandidates);
    }
    if let Some(&w) = candidates.iter().find(|&&w| w < 1) {
        return Err(EdgeBankError::BadWindow(w));
    }
    check_query(history, *months.end())?;
    let mut positives: Vec<((u32, u32), usize, [f64; 2])> = history
        .pairs()
        .flat_map(|(&pair, obs)| {
            obs.iter()
                .filter(|(m, _)| months.contains(m))
                .map(move |(m, a)| (pair, *m, [f64::from(a.calls_fwd), f64::from(a.sms_fwd)]))
        })
        .collect();
    if positives.is_empty() {
        return Err(EdgeBankError::EmptyValidation);
    }
    positives.sort_by_key(|(pair, m, _)| (*m, *pair));

    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(f64, usize)> = None;
    for w in sorted {
        let mut err = [0.0; 2];
        for (pair, t, truth) in &positives {
            let p = redgebank_predict(history, *pair, *t, w)?;
            err[0] += (truth[0] - p[0]).abs();
            err[1] += (truth[1] - p[1]).abs();
        }
        let score = (err[0] + err[1]) / (2.0 * positives.len() as f64);
        if best.is_none_or(|(b, _)| score < b) {
            best = Some((score, w));
        }
    }
    Ok(best.expect("non-empty candidates").1)
}
