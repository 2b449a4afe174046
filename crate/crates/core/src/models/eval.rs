use std::ops::RangeInclusive;

use rand::seq::index::sample;
use rayon::prelude::*;

use super::{month_queries, Dataset, Mode, ModelsError, QuerySet, Result, SubgraphSeq, TrainedModel};
use crate::edgebank::{redgebank_predict, EdgeHistory};
use crate::metrics::{EvalRecord, EvalReport, StrataScheme};
use crate::neural::Tape;
use crate::rng::SeedStream;

/// What produces the predictions.
#[derive(Clone, Copy)]
pub enum Predictor<'a> {
    Model(&'a TrainedModel),
    REdgeBank { window: usize },
}

impl Predictor<'_> {
    pub fn name(&self) -> String {
        match self {
            Predictor::Model(m) => m.model.architecture().to_string(),
            Predictor::REdgeBank { .. } => "redgebank".into(),
        }
    }
}

/// Query sampling shared by every predictor, so reports are paired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub neg_ratio: usize,
    pub khop: usize,
    pub seed: u64,
    /// Evaluate at most this many seeds, chosen deterministically.
    pub max_seeds: Option<usize>,
    /// Include historical negatives.
    pub historical: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            neg_ratio: 10,
            khop: 3,
            seed: 0,
            max_seeds: None,
            historical: true,
        }
    }
}

/// Keeps at most `cap` seeds, picked by the `seeds` stream and kept in order.
pub(crate) fn cap_seeds(mut seeds: Vec<u32>, cap: Option<usize>, stream: SeedStream) -> Vec<u32> {
    if let Some(cap) = cap.filter(|&c| c < seeds.len()) {
        let mut keep = sample(&mut stream.named("seeds").rng(), seeds.len(), cap).into_vec();
        keep.sort_unstable();
        seeds = keep.into_iter().map(|i| seeds[i]).collect();
    }
    seeds
}

/// Evaluation queries for every target month in `months` (each at least 2).
/// Random negatives come from a stream keyed by (seed, month) only.
pub fn eval_queries(seq: &SubgraphSeq, months: RangeInclusive<usize>, opts: &EvalOptions) -> Vec<QuerySet> {
    let root = SeedStream::new(opts.seed).named("eval-negatives").keyed(u64::from(seq.seed));
    months
        .map(|m| month_queries(seq, m, opts.neg_ratio, opts.historical, &mut root.keyed(m as u64).rng()))
        .collect()
}

/// Raw-count predictions for the query sets of one subgraph, in query order.
/// Model outputs are clipped at zero since counts cannot be negative.
pub(crate) fn model_predictions(tm: &TrainedModel, seq: &SubgraphSeq, sets: &[QuerySet]) -> Result<Vec<Vec<[f64; 2]>>> {
    let Some(last) = sets.iter().map(|s| s.month).max() else {
        return Ok(Vec::new());
    };
    let steps = last - 1;
    let mut queries = vec![Vec::new(); steps];
    for s in sets {
        queries[s.month - 2] = s.queries.iter().map(|q| (seq.seed_local, q.dst)).collect();
    }
    let tape = Tape::new();
    let p = tm.model.store.bind(&tape);
    let out = tm.model.forward(&tape, &p, seq, steps, &queries, Mode::Eval)?;
    Ok(sets
        .iter()
        .map(|s| match out.preds[s.month - 2] {
            Some(t) => t.value().rows().into_iter().map(|r| [r[0].max(0.0), r[1].max(0.0)]).collect(),
            None => Vec::new(),
        })
        .collect())
}

/// Per-query records for `seeds` over target `months`.
pub fn predict_records(
    pred: Predictor<'_>,
    ds: &Dataset,
    seeds: &[u32],
    months: RangeInclusive<usize>,
    opts: &EvalOptions,
) -> Result<Vec<EvalRecord>> {
    assert!(*months.start() >= 2 && *months.end() <= ds.months());
    if let Predictor::Model(tm) = pred {
        if !tm.norm.same_as(&ds.norm.stats) {
            return Err(ModelsError::NormStatsMismatch);
        }
    }
    let history = match pred {
        Predictor::REdgeBank { .. } => Some(EdgeHistory::from_graph(&ds.graph, *months.end() - 1)),
        Predictor::Model(_) => None,
    };
    let per_seed: Vec<Vec<EvalRecord>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<EvalRecord>> {
            let seq = ds.seq(seed, opts.khop)?;
            let sets = eval_queries(&seq, months.clone(), opts);
            let src = seq.nodes[seq.seed_local];
            let preds: Vec<Vec<[f64; 2]>> = match pred {
                Predictor::Model(tm) => model_predictions(tm, &seq, &sets)?,
                Predictor::REdgeBank { window } => {
                    let h = history.as_ref().expect("built above");
                    sets.iter()
                        .map(|s| {
                            s.queries
                                .iter()
                                .map(|q| {
                                    let r = redgebank_predict(h, (src, seq.nodes[q.dst]), s.month, window)?;
                                    Ok([r[0], r[1]])
                                })
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<_>>()?
                }
            };
            let nodes = &seq.nodes;
            Ok(sets
                .iter()
                .zip(preds)
                .flat_map(|(s, p)| {
                    s.queries.iter().zip(p).map(move |(q, pred)| EvalRecord {
                        src,
                        dst: nodes[q.dst],
                        month: s.month,
                        set: q.set,
                        pred,
                        truth: q.truth,
                    })
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

/// Evaluates on the test months of the dataset's split.
pub fn evaluate(
    pred: Predictor<'_>,
    ds: &Dataset,
    opts: &EvalOptions,
    schemes: &[StrataScheme],
) -> Result<(EvalReport, Vec<EvalRecord>)> {
    let months = ds.split.test_months();
    let seeds = cap_seeds(ds.seeds_for(months.clone()), opts.max_seeds, SeedStream::new(opts.seed).named("test"));
    if seeds.is_empty() {
        return Err(ModelsError::NoTestEdges);
    }
    let records = predict_records(pred, ds, &seeds, months.clone(), opts)?;
    let month_list: Vec<usize> = months.collect();
    let report = EvalReport::build(pred.name(), &records, &ds.attrs, &month_list, schemes);
    Ok((report, records))
}

pub fn evaluate_redgebank(
    ds: &Dataset,
    window: usize,
    opts: &EvalOptions,
    schemes: &[StrataScheme],
) -> Result<(EvalReport, Vec<EvalRecord>)> {
    evaluate(Predictor::REdgeBank { window }, ds, opts, schemes)
}
