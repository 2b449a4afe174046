use callnet_core::graphstore::{write_attrs_csv, write_events_csv};
use callnet_core::synthgen::{calibrate, generate, CalibrationTarget};
use log::{info, warn};
use serde::Serialize;

use super::Context;
use crate::error::Result;
use crate::io::{to_toml, write_text, write_with, ATTRIBUTES, CALIBRATION, EVENTS, GENERATOR};

/// Search steps allowed when calibrating.
const CALIBRATION_BUDGET: usize = 60;

#[derive(Serialize)]
struct CalibrationFile {
    converged: bool,
    iterations: usize,
    novelty: f64,
    reoccurrence: f64,
    surprise: f64,
    tie_persistence: f64,
    novel_tie_rate: f64,
}

pub fn run(ctx: &Context, nodes: Option<usize>, months: Option<usize>, calibrate_first: bool) -> Result<()> {
    let mut cfg = ctx.cfg.generator.clone().unwrap_or_default();
    if let Some(n) = nodes {
        cfg.n_nodes = n;
    }
    if let Some(m) = months {
        cfg.n_months = m;
    }
    cfg.rng_seed = ctx.seed;
    cfg.validate()?;
    let dir = &ctx.data_dir;
    if calibrate_first {
        // aim inside the band so filtering does not push the data out of it
        let rep = calibrate(&cfg, &CalibrationTarget::default().scaled(0.5), CALIBRATION_BUDGET)?;
        if !rep.converged {
            warn!("calibration did not converge in {} iterations", rep.iterations);
        }
        info!(
            "calibrated: novelty {:.4}, reoccurrence {:.4}, surprise {:.4}",
            rep.achieved.novelty, rep.achieved.reoccurrence, rep.achieved.surprise
        );
        let file = CalibrationFile {
            converged: rep.converged,
            iterations: rep.iterations,
            novelty: rep.achieved.novelty,
            reoccurrence: rep.achieved.reoccurrence,
            surprise: rep.achieved.surprise,
            tie_persistence: rep.config.tie_persistence,
            novel_tie_rate: rep.config.novel_tie_rate,
        };
        write_text(&dir.join(CALIBRATION), &to_toml("calibration", &file)?)?;
        cfg = rep.config;
    }
    let out = generate(&cfg)?;
    info!("{} events for {} users", out.events.len(), out.attrs.len());
    write_with(&dir.join(EVENTS), |w| Ok(write_events_csv(w, &out.events)?))?;
    write_with(&dir.join(ATTRIBUTES), |w| Ok(write_attrs_csv(w, &out.attrs)?))?;
    write_text(&dir.join(GENERATOR), &cfg.to_toml()?)?;
    Ok(())
}
