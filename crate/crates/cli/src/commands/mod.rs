mod evaluate;
mod generate;
mod stats;
mod train;

use std::path::PathBuf;

use callnet_core::graphstore::ObservationWindow;
use callnet_core::synthgen::GenConfig;

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::io::recorded_generator;
use crate::{Cli, Command, Common};

/// Settings shared by every command after merging file and flags.
pub struct Context {
    pub cfg: PipelineConfig,
    pub data_dir: PathBuf,
    pub seed: u64,
}

impl Context {
    fn new(cfg: PipelineConfig, common: &Common) -> Self {
        let data_dir = common
            .data_dir
            .clone()
            .or_else(|| cfg.paths.data_dir.clone())
            .unwrap_or_else(|| PathBuf::from("data"));
        let seed = common.seed.or(cfg.seed).unwrap_or(0);
        Context { cfg, data_dir, seed }
    }

    /// Generator settings: recorded with the data, else the config file, else defaults.
    fn generator(&self) -> Result<GenConfig> {
        Ok(match recorded_generator(&self.data_dir)? {
            Some(g) => g,
            None => self.cfg.generator.clone().unwrap_or_default(),
        })
    }

    fn window(&self, months: Option<usize>) -> Result<ObservationWindow> {
        let mut g = self.generator()?;
        if let Some(m) = months {
            g.n_months = m;
        }
        Ok(g.window())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Generate {
            common,
            nodes,
            months,
            calibrate,
        } => generate::run(&Context::new(cfg, &common), nodes, months, calibrate),
        Command::Stats { common, months } => stats::run(&Context::new(cfg, &common), months),
        Command::Train {
            common,
            run_dir,
            arch,
            window,
            hyper,
        } => train::run(&Context::new(cfg, &common), run_dir, arch, window, &hyper),
        Command::Evaluate {
            common,
            run_dirs,
            out_dir,
            by,
            neg_ratio,
            khop,
            max_seeds,
        } => evaluate::run(
            &Context::new(cfg, &common),
            &run_dirs,
            out_dir,
            &by,
            evaluate::Overrides {
                neg_ratio,
                khop,
                max_seeds,
            },
        ),
    }
}
