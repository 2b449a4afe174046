use std::io::Write;
use std::path::{Path, PathBuf};

use callnet_core::edgebank::{tune_window, EdgeHistory};
use callnet_core::metrics::io::{report_header, strata_header, write_report_rows, write_strata_rows};
use callnet_core::metrics::{EvalReport, StrataScheme};
use callnet_core::models::{evaluate, train, Architecture, Dataset, EvalOptions, Predictor};
use callnet_core::neural::write_checkpoint;
use log::info;

use super::Context;
use crate::error::{CliError, IoContext, Result};
use crate::io::{load_graph, to_toml, write_text, write_with, RunFile, CHECKPOINT, CURVES, REPORT};
use crate::{Arch, Hyper};

const WINDOW_CANDIDATES: [usize; 6] = [1, 2, 3, 4, 5, 6];
const DEFAULT_NEG_RATIO: usize = 10;
const DEFAULT_KHOP: usize = 3;

pub fn load_dataset(ctx: &Context) -> Result<Dataset> {
    let graph = load_graph(&ctx.data_dir, ctx.window(None)?, &ctx.cfg.filter)?;
    let split = ctx.cfg.split_for(graph.months())?;
    Ok(Dataset::new(graph, split)?)
}

/// Writes `report.csv` and `by_month.csv` for one model into `dir`.
pub fn write_run_report(dir: &Path, report: &EvalReport) -> Result<()> {
    let p = dir.join(REPORT);
    write_with(&p, |w| {
        writeln!(w, "{}", report_header()).at(&p)?;
        write_report_rows(w, report).at(&p)
    })?;
    let p = dir.join("by_month.csv");
    write_with(&p, |w| {
        writeln!(w, "{}", strata_header(StrataScheme::PerMonth)).at(&p)?;
        write_strata_rows(w, &report.model, &report.per_month).at(&p)
    })
}

fn architecture(arch: Arch) -> Option<Architecture> {
    match arch {
        Arch::Gcrn => Some(Architecture::Gcrn),
        Arch::Vgrnn => Some(Architecture::Vgrnn),
        Arch::Dysat => Some(Architecture::Dysat),
        Arch::Roland => Some(Architecture::Roland),
        Arch::Redgebank => None,
    }
}

pub fn run(ctx: &Context, run_dir: Option<PathBuf>, arch: Option<Arch>, window: Option<usize>, hyper: &Hyper) -> Result<()> {
    let arch = match (arch, ctx.cfg.models.as_slice()) {
        (Some(a), _) => a,
        (None, [only]) => match only.architecture {
            Architecture::Gcrn => Arch::Gcrn,
            Architecture::Vgrnn => Arch::Vgrnn,
            Architecture::Dysat => Arch::Dysat,
            Architecture::Roland => Arch::Roland,
        },
        (None, _) => return Err(CliError::Config("--arch is required unless the config lists exactly one model".into())),
    };
    let dir = run_dir
        .or_else(|| ctx.cfg.paths.run_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{arch:?}").to_lowercase()));
    let ds = load_dataset(ctx)?;
    let eval = &ctx.cfg.evaluation;
    let max_seeds = hyper.max_seeds.or(eval.max_seeds);

    let (run, report) = match architecture(arch) {
        None => {
            let w = match window.or(eval.window) {
                Some(w) => w,
                None => {
                    let h = EdgeHistory::from_graph(&ds.graph, ds.split.val_cutoff);
                    tune_window(&h, ds.split.val_months(), &WINDOW_CANDIDATES)?
                }
            };
            info!("rEdgeBank window {w}");
            let opts = EvalOptions {
                neg_ratio: hyper.neg_ratio.or(eval.neg_ratio).unwrap_or(DEFAULT_NEG_RATIO),
                khop: hyper.khop.or(eval.khop).unwrap_or(DEFAULT_KHOP),
                seed: ctx.seed,
                max_seeds,
                historical: true,
            };
            let (report, _) = evaluate(Predictor::REdgeBank { window: w }, &ds, &opts, &[])?;
            let run = RunFile {
                architecture: "redgebank".into(),
                seed: ctx.seed,
                window: Some(w),
                best_epoch: None,
                eval_khop: opts.khop,
                eval_neg_ratio: opts.neg_ratio,
                split: ds.split,
                norm: ds.norm.stats,
                model: None,
            };
            (run, report)
        }
        Some(a) => {
            let mut cfg = ctx.cfg.model(a);
            cfg.rng_seed = ctx.seed;
            macro_rules! flag {
                ($($flag:ident => $field:ident),*) => { $( if let Some(v) = hyper.$flag { cfg.$field = v; } )* };
            }
            flag!(epochs => max_epochs, hidden => hidden_dim, lr => learning_rate, patience => patience,
                  batch => batch_subgraphs, khop => khop, neg_ratio => neg_ratio);
            cfg.max_seeds = max_seeds.or(cfg.max_seeds);
            let tm = train(&ds, &cfg)?;
            let p = dir.join(CHECKPOINT);
            write_with(&p, |w| Ok(write_checkpoint(w, &tm.model.store)?))?;
            let p = dir.join(CURVES);
            write_with(&p, |w| {
                writeln!(w, "epoch,train_loss,val_mae").at(&p)?;
                for c in &tm.curves {
                    writeln!(w, "{},{:.9},{:.9}", c.epoch, c.train_loss, c.val_mae).at(&p)?;
                }
                Ok(())
            })?;
            let opts = EvalOptions {
                neg_ratio: cfg.neg_ratio,
                khop: cfg.khop,
                seed: ctx.seed,
                max_seeds,
                historical: true,
            };
            let (report, _) = evaluate(Predictor::Model(&tm), &ds, &opts, &[])?;
            let run = RunFile {
                architecture: a.to_string(),
                seed: ctx.seed,
                window: None,
                best_epoch: Some(tm.best_epoch),
                eval_khop: opts.khop,
                eval_neg_ratio: opts.neg_ratio,
                split: ds.split,
                norm: ds.norm.stats,
                model: Some(cfg),
            };
            (run, report)
        }
    };
    write_text(&RunFile::path(&dir), &to_toml("run", &run)?)?;
    write_run_report(&dir, &report)?;
    info!("test averaged MAE {:.4} written to {}", report.averaged_mae(), dir.display());
    Ok(())
}
