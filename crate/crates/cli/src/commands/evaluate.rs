use std::io::Write;
use std::path::{Path, PathBuf};

use callnet_core::metrics::io::{fmt_f64, report_header, strata_file_name, strata_header, write_report_rows, write_strata_rows, CHANNELS};
use callnet_core::metrics::{
    wilcoxon_signed_rank, EdgeSet, EvalRecord, EvalReport, MetricsError, StrataScheme, WilcoxonMethod,
};
use callnet_core::models::{evaluate, EvalOptions, Model, Predictor, TrainedModel};
use callnet_core::neural::read_checkpoint;
use log::info;

use super::train::load_dataset;
use super::Context;
use crate::error::{CliError, IoContext, Result};
use crate::io::{open, write_with, RunFile, CHECKPOINT, COMPARISON, REPORT, WILCOXON};
use crate::Strata;

const DEFAULT_NEG_RATIO: usize = 10;

pub struct Overrides {
    pub neg_ratio: Option<usize>,
    pub khop: Option<usize>,
    pub max_seeds: Option<usize>,
}

struct Evaluated {
    label: String,
    redgebank: bool,
    report: EvalReport,
    records: Vec<EvalRecord>,
}

fn scheme(s: Strata) -> StrataScheme {
    match s {
        Strata::Gender => StrataScheme::GenderPairs,
        Strata::Age => StrataScheme::AgeGrid,
        Strata::Month => StrataScheme::PerMonth,
    }
}

fn load_model(dir: &Path, run: &RunFile) -> Result<TrainedModel> {
    let cfg = run
        .model
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("{}: model run without a model section", dir.display())))?;
    let mut model = Model::build(cfg)?;
    read_checkpoint(open(&dir.join(CHECKPOINT))?, &mut model.store)?;
    Ok(TrainedModel {
        model,
        norm: run.norm,
        curves: Vec::new(),
        best_epoch: run.best_epoch.unwrap_or(0),
    })
}

/// Unique label per run: the architecture, suffixed on repeats.
fn label(arch: &str, taken: &[Evaluated]) -> String {
    let n = taken.iter().filter(|e| e.label.split('#').next() == Some(arch)).count();
    if n == 0 {
        arch.to_string()
    } else {
        format!("{arch}#{}", n + 1)
    }
}

pub fn run(ctx: &Context, run_dirs: &[PathBuf], out_dir: Option<PathBuf>, by: &[Strata], o: Overrides) -> Result<()> {
    let ds = load_dataset(ctx)?;
    let runs: Vec<RunFile> = run_dirs.iter().map(|d| RunFile::load(d)).collect::<Result<_>>()?;
    for (dir, run) in run_dirs.iter().zip(&runs) {
        if !run.norm.same_as(&ds.norm.stats) || run.split != ds.split {
            return Err(CliError::NormMismatch { run: dir.clone() });
        }
    }
    let eval = &ctx.cfg.evaluation;
    let opts = EvalOptions {
        neg_ratio: o.neg_ratio.or(eval.neg_ratio).unwrap_or_else(|| {
            runs.iter().map(|r| r.eval_neg_ratio).max().unwrap_or(DEFAULT_NEG_RATIO)
        }),
        khop: o
            .khop
            .or(eval.khop)
            .unwrap_or_else(|| runs.iter().map(|r| r.eval_khop).max().unwrap_or(3)),
        seed: ctx.seed,
        max_seeds: o.max_seeds.or(eval.max_seeds),
        historical: true,
    };
    let mut schemes: Vec<StrataScheme> = by.iter().map(|&s| scheme(s)).collect();
    schemes.sort_by_key(|s| s.as_str());
    schemes.dedup();

    let mut done: Vec<Evaluated> = Vec::new();
    for (dir, run) in run_dirs.iter().zip(&runs) {
        let (report, records, redgebank) = if run.architecture == "redgebank" {
            let w = run
                .window
                .ok_or_else(|| CliError::Config(format!("{}: rEdgeBank run without a window", dir.display())))?;
            let (r, recs) = evaluate(Predictor::REdgeBank { window: w }, &ds, &opts, &schemes)?;
            (r, recs, true)
        } else {
            let tm = load_model(dir, run)?;
            let (r, recs) = evaluate(Predictor::Model(&tm), &ds, &opts, &schemes)?;
            (r, recs, false)
        };
        let mut report = report;
        report.model = label(&run.architecture, &done);
        info!("{}: averaged MAE {:.4}", report.model, report.averaged_mae());
        done.push(Evaluated {
            label: report.model.clone(),
            redgebank,
            report,
            records,
        });
    }

    let out = out_dir.unwrap_or_else(|| ctx.data_dir.join("evaluation"));
    let p = out.join(REPORT);
    write_with(&p, |w| {
        writeln!(w, "{}", report_header()).at(&p)?;
        for e in &done {
            write_report_rows(&mut *w, &e.report).at(&p)?;
        }
        Ok(())
    })?;
    let p = out.join(COMPARISON);
    write_with(&p, |w| write_comparison(w, &done).at(&p))?;
    let p = out.join(WILCOXON);
    write_with(&p, |w| write_wilcoxon(w, &done, &p))?;
    for s in &schemes {
        let p = out.join(strata_file_name(*s));
        write_with(&p, |w| {
            writeln!(w, "{}", strata_header(*s)).at(&p)?;
            for e in &done {
                let table = if *s == StrataScheme::PerMonth {
                    &e.report.per_month
                } else {
                    e.report.strata.iter().find(|t| t.scheme == *s).expect("scheme requested")
                };
                write_strata_rows(&mut *w, &e.label, table).at(&p)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

/// `channel,model,positive,random_negative,historical_negative,average`;
/// cells read `mean (std)`, and the lowest mean of each column within a
/// channel carries a trailing `*`.
fn write_comparison<W: Write>(w: &mut W, done: &[Evaluated]) -> std::io::Result<()> {
    write!(w, "channel,model")?;
    for s in EdgeSet::ALL {
        write!(w, ",{}", s.as_str())?;
    }
    writeln!(w, ",average")?;
    for (c, channel) in CHANNELS.iter().enumerate() {
        let mean = |e: &Evaluated, col: usize| -> Option<f64> {
            match EdgeSet::ALL.get(col) {
                Some(&s) => e.report.set(s).map(|st| st[c].mean),
                None => Some(e.report.average[c]).filter(|v| !v.is_nan()),
            }
        };
        let best: Vec<Option<f64>> = (0..=EdgeSet::ALL.len())
            .map(|col| done.iter().filter_map(|e| mean(e, col)).min_by(f64::total_cmp))
            .collect();
        for e in done {
            write!(w, "{channel},{}", e.label)?;
            for (col, b) in best.iter().enumerate() {
                let star = |m: f64| if Some(m) == *b { "*" } else { "" };
                match (EdgeSet::ALL.get(col), mean(e, col)) {
                    (_, None) => write!(w, ",")?,
                    (Some(&s), Some(m)) => {
                        let sd = e.report.set(s).expect("present")[c].std;
                        write!(w, ",{} ({}){}", fmt_f64(m), fmt_f64(sd), star(m))?
                    }
                    (None, Some(m)) => write!(w, ",{}{}", fmt_f64(m), star(m))?,
                }
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Paired test of per-query absolute errors against the first rEdgeBank run:
/// `model,baseline,channel,edge_set,n,statistic,p_value,method`.
fn write_wilcoxon<W: Write>(w: &mut W, done: &[Evaluated], path: &Path) -> Result<()> {
    writeln!(w, "model,baseline,channel,edge_set,n,statistic,p_value,method").at(path)?;
    let Some(base) = done.iter().find(|e| e.redgebank) else {
        return Ok(());
    };
    let key = |r: &EvalRecord| (r.src, r.dst, r.month, r.set);
    for e in done.iter().filter(|e| !e.redgebank) {
        if e.records.len() != base.records.len() || e.records.iter().zip(&base.records).any(|(a, b)| key(a) != key(b)) {
            return Err(CliError::UnpairedRuns);
        }
        for (c, channel) in CHANNELS.iter().enumerate() {
            for set in EdgeSet::ALL {
                let (a, b): (Vec<f64>, Vec<f64>) = e
                    .records
                    .iter()
                    .zip(&base.records)
                    .filter(|(r, _)| r.set == set)
                    .map(|(r, s)| (r.abs_error(c), s.abs_error(c)))
                    .unzip();
                let head = format!("{},{},{channel},{}", e.label, base.label, set.as_str());
                match wilcoxon_signed_rank(&a, &b) {
                    Ok(t) => {
                        let method = match t.method {
                            WilcoxonMethod::Exact => "exact",
                            WilcoxonMethod::Normal => "normal",
                            WilcoxonMethod::Degenerate => "degenerate",
                        };
                        writeln!(w, "{head},{},{},{},{method}", t.n, fmt_f64(t.statistic), fmt_f64(t.p_value)).at(path)?
                    }
                    Err(MetricsError::TooFewDifferences(n)) => writeln!(w, "{head},{n},,,too_few").at(path)?,
                    Err(err) => return Err(err.into()),
                }
            }
        }
    }
    Ok(())
}
