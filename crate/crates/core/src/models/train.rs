use std::ops::RangeInclusive;

use log::{debug, info};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::{cap_seeds, predict_records, EvalOptions};
use super::loss::weighted_se_sum;
use super::{
    gaussian_nll, month_queries, Architecture, Dataset, LossWeights, Mode, Model, ModelConfig, ModelsError,
    Predictor, QuerySet, Result, SubgraphSeq,
};
use crate::graphstore::NormStats;
use crate::metrics::{EdgeSet, EvalReport};
use crate::neural::{BatchNorm, BnUpdate, Bound, Mat, Tape, Tensor, Adam};
use crate::rng::SeedStream;

const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: f64,
}

/// A model restored to its best validation epoch.
pub struct TrainedModel {
    pub model: Model,
    pub norm: NormStats,
    pub curves: Vec<EpochStats>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Summed loss of one subgraph and the number of queries it covers.
pub struct SubgraphLoss<'t> {
    pub loss: Tensor<'t>,
    pub queries: usize,
    pub bn: Vec<BnUpdate>,
}

/// Unrolls `seq` far enough to predict every query set and returns the
/// weighted squared error (or, for VGRNN, Gaussian NLL plus KL), summed.
pub fn subgraph_loss<'t>(
    model: &Model,
    tape: &'t Tape,
    p: &Bound<'t>,
    seq: &SubgraphSeq,
    sets: &[QuerySet],
    mode: Mode,
) -> Result<SubgraphLoss<'t>> {
    let cfg = &model.config;
    let w = LossWeights {
        positive: cfg.pos_weight,
        negative: cfg.neg_weight,
    };
    let steps = sets.iter().map(|s| s.month - 1).max().unwrap_or(0);
    let mut queries = vec![Vec::new(); steps];
    for s in sets {
        queries[s.month - 2] = s.queries.iter().map(|q| (seq.seed_local, q.dst)).collect();
    }
    let out = model.forward(tape, p, seq, steps, &queries, mode)?;
    let mut total = tape.scalar(0.0);
    let mut count = 0;
    for s in sets {
        let Some(pred) = out.preds[s.month - 2] else { continue };
        let targets = Array2::from_shape_fn((s.queries.len(), 2), |(i, c)| s.queries[i].truth[c]);
        let kinds: Vec<EdgeSet> = s.queries.iter().map(|q| q.set).collect();
        let term = if cfg.architecture == Architecture::Vgrnn {
            gaussian_nll(pred, &targets, &kinds, w)?
        } else {
            weighted_se_sum(pred, &targets, &kinds, w)?
        };
        total = total + term;
        count += s.queries.len();
    }
    if let Some(kl) = out.kl {
        total = total + kl;
    }
    Ok(SubgraphLoss {
        loss: total,
        queries: count,
        bn: out.bn,
    })
}

/// Training query sets for one seed in one epoch: positives and random
/// negatives for every training month after the first.
fn training_sets(seq: &SubgraphSeq, months: RangeInclusive<usize>, neg_ratio: usize, stream: SeedStream) -> Vec<QuerySet> {
    months
        .map(|m| month_queries(seq, m, neg_ratio, false, &mut stream.keyed(m as u64).rng()))
        .collect()
}

struct BatchGrad {
    loss: f64,
    queries: usize,
    grads: Vec<Mat>,
    bn: Vec<BnUpdate>,
}

fn batch_gradient(
    model: &Model,
    seqs: &[&SubgraphSeq],
    months: RangeInclusive<usize>,
    root: SeedStream,
    epoch: usize,
) -> Result<Vec<BatchGrad>> {
    let neg = root.named("negatives").keyed(epoch as u64);
    let noise = root.named("noise").keyed(epoch as u64);
    seqs.par_iter()
        .map(|seq| {
            let key = u64::from(seq.seed);
            let sets = training_sets(seq, months.clone(), model.config.neg_ratio, neg.keyed(key));
            let tape = Tape::new();
            let p = model.store.bind(&tape);
            let mode = Mode::Train { noise: noise.keyed(key) };
            let sl = subgraph_loss(model, &tape, &p, seq, &sets, mode)?;
            tape.backward(sl.loss)?;
            Ok(BatchGrad {
                loss: sl.loss.item(),
                queries: sl.queries,
                grads: p.grads(),
                bn: sl.bn,
            })
        })
        .collect()
}

/// One update per batch-norm layer: the mean of its batch statistics over
/// every subgraph and month of the mini-batch, in first-seen layer order.
fn average_bn(updates: &[BnUpdate]) -> Vec<BnUpdate> {
    let mut out: Vec<(BnUpdate, usize)> = Vec::new();
    for u in updates {
        match out.iter_mut().find(|(a, _)| a.mean_id == u.mean_id) {
            Some((a, n)) => {
                a.mean += &u.mean;
                a.var += &u.var;
                *n += 1;
            }
            None => out.push((u.clone(), 1)),
        }
    }
    out.into_iter()
        .map(|(mut a, n)| {
            a.mean /= n as f64;
            a.var /= n as f64;
            a
        })
        .collect()
}

fn norms_string(model: &Model) -> String {
    model
        .store
        .norms()
        .iter()
        .map(|(n, v)| format!("{n}={v:.4e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Averaged validation MAE over the validation months.
fn validation_mae(tm: &TrainedModel, ds: &Dataset, seeds: &[u32], opts: &EvalOptions) -> Result<f64> {
    let months = ds.split.val_months();
    let records = predict_records(Predictor::Model(tm), ds, seeds, months.clone(), opts)?;
    let list: Vec<usize> = months.collect();
    let mae = EvalReport::build("val", &records, &ds.attrs, &list, &[]).averaged_mae();
    Ok(if mae.is_nan() { f64::INFINITY } else { mae })
}

/// Adam training with early stopping on validation averaged MAE. Gradients
/// of a mini-batch are computed in parallel per subgraph and summed in seed
/// order, so results do not depend on the thread count.
pub fn train(ds: &Dataset, config: &ModelConfig) -> Result<TrainedModel> {
    config.validate()?;
    let root = SeedStream::new(config.rng_seed);
    let train_months = 2..=ds.split.train_cutoff;
    let seeds = cap_seeds(ds.seeds_for(train_months.clone()), config.max_seeds, root.named("train"));
    if seeds.is_empty() {
        return Err(ModelsError::NoTrainingSeeds);
    }
    let seqs: Vec<SubgraphSeq> = seeds.par_iter().map(|&s| ds.seq(s, config.khop)).collect::<Result<_>>()?;
    let val_seeds = cap_seeds(ds.seeds_for(ds.split.val_months()), config.max_seeds, root.named("val"));
    let val_opts = EvalOptions {
        neg_ratio: config.neg_ratio,
        khop: config.khop,
        seed: config.rng_seed,
        max_seeds: None,
        // validation poses the same kinds of queries as training
        historical: false,
    };

    let mut tm = TrainedModel {
        model: Model::build(config)?,
        norm: ds.norm.stats,
        curves: Vec::new(),
        best_epoch: 0,
    };
    let mut adam = Adam::new(&tm.model.store, config.learning_rate);
    let mut best: Option<(f64, Vec<Mat>)> = None;
    let mut waited = 0;
    let mut order: Vec<usize> = (0..seqs.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut root.named("shuffle").keyed(epoch as u64).rng());
        let (mut loss_sum, mut query_sum) = (0.0, 0usize);
        for (b, chunk) in order.chunks(config.batch_subgraphs).enumerate() {
            let batch: Vec<&SubgraphSeq> = chunk.iter().map(|&i| &seqs[i]).collect();
            let parts = batch_gradient(&tm.model, &batch, train_months.clone(), root, epoch)?;
            let n: usize = parts.iter().map(|g| g.queries).sum::<usize>().max(1);
            let loss: f64 = parts.iter().map(|g| g.loss).sum();
            if !loss.is_finite() {
                return Err(ModelsError::NanLoss {
                    epoch,
                    batch: b,
                    norms: norms_string(&tm.model),
                });
            }
            let mut grads = parts[0].grads.clone();
            for g in &parts[1..] {
                for (acc, x) in grads.iter_mut().zip(&g.grads) {
                    *acc += x;
                }
            }
            let scale = 1.0 / n as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut tm.model.store, &grads);
            let updates: Vec<BnUpdate> = parts.into_iter().flat_map(|g| g.bn).collect();
            BatchNorm::apply_updates(&mut tm.model.store, &average_bn(&updates), BN_MOMENTUM);
            loss_sum += loss;
            query_sum += n;
            debug!("epoch {epoch} batch {b}: loss {:.6}", loss * scale);
        }
        let val_mae = validation_mae(&tm, ds, &val_seeds, &val_opts)?;
        let train_loss = loss_sum / query_sum.max(1) as f64;
        info!("epoch {epoch}: train loss {train_loss:.6}, validation MAE {val_mae:.6}");
        tm.curves.push(EpochStats {
            epoch,
            train_loss,
            val_mae,
        });
        if best.as_ref().is_none_or(|(b, _)| val_mae < *b) {
            best = Some((val_mae, tm.model.store.values()));
            tm.best_epoch = epoch;
            waited = 0;
        } else {
            waited += 1;
            if waited > config.patience {
                break;
            }
        }
    }
    if let Some((_, values)) = best {
        tm.model.store.set_values(values);
    }
    Ok(tm)
}
