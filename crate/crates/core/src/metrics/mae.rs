use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};
use crate::graphstore::{Gender, NodeAttr};

/// Inclusive age bands used for the age grid.
pub const AGE_GROUPS: [(u32, u32); 4] = [(18, 21), (25, 35), (45, 55), (60, 65)];

pub fn age_group(age: u32) -> Option<usize> {
    AGE_GROUPS
        .iter()
        .position(|&(lo, hi)| (lo..=hi).contains(&age))
}

/// Mean and population standard deviation of absolute errors on one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

impl ChannelStats {
    fn from_errors(errors: impl Iterator<Item = f64> + Clone) -> Option<Self> {
        let count = errors.clone().count();
        if count == 0 {
            return None;
        }
        let mean = errors.clone().sum::<f64>() / count as f64;
        let var = errors.map(|e| (e - mean).powi(2)).sum::<f64>() / count as f64;
        Some(ChannelStats {
            count,
            mean,
            std: var.sqrt(),
        })
    }
}

/// Per-channel (calls, SMS) MAE with population std.
pub fn mae(preds: &[[f64; 2]], truths: &[[f64; 2]]) -> Result<[ChannelStats; 2]> {
    if preds.len() != truths.len() {
        return Err(MetricsError::LengthMismatch(preds.len(), truths.len()));
    }
    let out: Option<Vec<ChannelStats>> = (0..2)
        .map(|c| {
            ChannelStats::from_errors(
                preds
                    .iter()
                    .zip(truths)
                    .map(move |(p, t)| (t[c] - p[c]).abs()),
            )
        })
        .collect();
    let out = out.ok_or(MetricsError::Empty)?;
    Ok([out[0], out[1]])
}

/// Evaluation edge populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeSet {
    Positive,
    RandomNegative,
    HistoricalNegative,
}

impl EdgeSet {
    pub const ALL: [EdgeSet; 3] = [
        EdgeSet::Positive,
        EdgeSet::RandomNegative,
        EdgeSet::HistoricalNegative,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeSet::Positive => "positive",
            EdgeSet::RandomNegative => "random_negative",
            EdgeSet::HistoricalNegative => "historical_negative",
        }
    }
}

/// One evaluated query edge. `src`/`dst` are global node indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub src: u32,
    pub dst: u32,
    pub month: usize,
    pub set: EdgeSet,
    pub pred: [f64; 2],
    pub truth: [f64; 2],
}

impl EvalRecord {
    pub fn abs_error(&self, channel: usize) -> f64 {
        (self.truth[channel] - self.pred[channel]).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrataScheme {
    GenderPairs,
    AgeGrid,
    PerMonth,
}

impl StrataScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            StrataScheme::GenderPairs => "gender",
            StrataScheme::AgeGrid => "age",
            StrataScheme::PerMonth => "month",
        }
    }
}

/// One stratum; `stats` is `None` when no edge falls in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataCell {
    /// (source label, destination label) for pair schemes, (month, "") for months.
    pub key: (String, String),
    pub stats: Option<[ChannelStats; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataTable {
    pub scheme: StrataScheme,
    pub cells: Vec<StrataCell>,
}

impl StrataTable {
    pub fn cell(&self, a: &str, b: &str) -> Option<&StrataCell> {
        self.cells.iter().find(|c| c.key.0 == a && c.key.1 == b)
    }
}

fn cell_of(key: (String, String), records: &[&EvalRecord]) -> StrataCell {
    let preds: Vec<[f64; 2]> = records.iter().map(|r| r.pred).collect();
    let truths: Vec<[f64; 2]> = records.iter().map(|r| r.truth).collect();
    StrataCell {
        key,
        stats: mae(&preds, &truths).ok(),
    }
}

fn age_label(g: usize) -> String {
    let (lo, hi) = AGE_GROUPS[g];
    format!("{lo}-{hi}")
}

/// MAE per stratum. `attrs` is indexed by global node index; `months` lists
/// the months reported by the per-month scheme. Records whose endpoints fall
/// outside every age band are left out of the age grid.
pub fn stratified_mae(
    records: &[EvalRecord],
    attrs: &[NodeAttr],
    scheme: StrataScheme,
    months: &[usize],
) -> StrataTable {
    let cells = match scheme {
        StrataScheme::GenderPairs => {
            let genders = [Gender::A, Gender::B];
            genders
                .iter()
                .flat_map(|&gs| genders.iter().map(move |&gd| (gs, gd)))
                .map(|(gs, gd)| {
                    let sel: Vec<&EvalRecord> = records
                        .iter()
                        .filter(|r| {
                            attrs[r.src as usize].gender == gs && attrs[r.dst as usize].gender == gd
                        })
                        .collect();
                    cell_of((gs.as_str().into(), gd.as_str().into()), &sel)
                })
                .collect()
        }
        StrataScheme::AgeGrid => (0..AGE_GROUPS.len())
            .flat_map(|a| (0..AGE_GROUPS.len()).map(move |b| (a, b)))
            .map(|(a, b)| {
                let sel: Vec<&EvalRecord> = records
                    .iter()
                    .filter(|r| {
                        age_group(attrs[r.src as usize].age) == Some(a)
                            && age_group(attrs[r.dst as usize].age) == Some(b)
                    })
                    .collect();
                cell_of((age_label(a), age_label(b)), &sel)
            })
            .collect(),
        StrataScheme::PerMonth => months
            .iter()
            .map(|&m| {
                let sel: Vec<&EvalRecord> = records.iter().filter(|r| r.month == m).collect();
                cell_of((m.to_string(), String::new()), &sel)
            })
            .collect(),
    };
    StrataTable { scheme, cells }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub set: EdgeSet,
    /// `None` when the set is empty.
    pub stats: Option<[ChannelStats; 2]>,
}

/// MAE decomposition for one model on the test months.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    /// Positive, random-negative, historical-negative, in that order.
    pub sets: Vec<SetSummary>,
    /// Unweighted mean of the available set means, per channel.
    pub average: [f64; 2],
    pub per_month: StrataTable,
    pub strata: Vec<StrataTable>,
}

impl EvalReport {
    /// Summarizes records; per-month cells cover `months`. Strata tables are
    /// computed on positive edges.
    pub fn build(
        model: impl Into<String>,
        records: &[EvalRecord],
        attrs: &[NodeAttr],
        months: &[usize],
        schemes: &[StrataScheme],
    ) -> Self {
        let sets: Vec<SetSummary> = EdgeSet::ALL
            .iter()
            .map(|&set| {
                let (p, t): (Vec<_>, Vec<_>) = records
                    .iter()
                    .filter(|r| r.set == set)
                    .map(|r| (r.pred, r.truth))
                    .unzip();
                SetSummary {
                    set,
                    stats: mae(&p, &t).ok(),
                }
            })
            .collect();
        let average = std::array::from_fn(|c| {
            let means: Vec<f64> = sets
                .iter()
                .filter_map(|s| s.stats.map(|st| st[c].mean))
                .collect();
            if means.is_empty() {
                f64::NAN
            } else {
                means.iter().sum::<f64>() / means.len() as f64
            }
        });
        let positives: Vec<EvalRecord> = records
            .iter()
            .filter(|r| r.set == EdgeSet::Positive)
            .copied()
            .collect();
        EvalReport {
            model: model.into(),
            sets,
            average,
            per_month: stratified_mae(&positives, attrs, StrataScheme::PerMonth, months),
            strata: schemes
                .iter()
                .filter(|&&s| s != StrataScheme::PerMonth)
                .map(|&s| stratified_mae(&positives, attrs, s, months))
                .collect(),
        }
    }

    pub fn set(&self, set: EdgeSet) -> Option<[ChannelStats; 2]> {
        self.sets.iter().find(|s| s.set == set).and_then(|s| s.stats)
    }

    /// Mean of the two channels' averages; the model-selection criterion.
    pub fn averaged_mae(&self) -> f64 {
        (self.average[0] + self.average[1]) / 2.0
    }
}
