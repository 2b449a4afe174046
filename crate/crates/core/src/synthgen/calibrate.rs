use std::collections::HashSet;

use log::info;

use super::{plan_ties, GenConfig, Result, SynthError, TiePlan};
use crate::graphstore::Split;

/// Target indices with per-index tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTarget {
    pub novelty: f64,
    pub reoccurrence: f64,
    pub surprise: f64,
    pub tolerance: [f64; 3],
}

impl Default for CalibrationTarget {
    fn default() -> Self {
        CalibrationTarget {
            novelty: 0.05,
            reoccurrence: 0.78,
            surprise: 0.03,
            tolerance: [0.02, 0.05, 0.02],
        }
    }
}

impl CalibrationTarget {
    /// Same targets with every tolerance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        CalibrationTarget {
            tolerance: self.tolerance.map(|t| t * factor),
            ..*self
        }
    }

    fn deviations(&self, got: &Indices) -> [f64; 3] {
        [
            (got.novelty - self.novelty) / self.tolerance[0],
            (got.reoccurrence - self.reoccurrence) / self.tolerance[1],
            (got.surprise - self.surprise) / self.tolerance[2],
        ]
    }

    pub fn accepts(&self, got: &Indices) -> bool {
        self.deviations(got).iter().all(|d| d.abs() <= 1.0)
    }

    fn loss(&self, got: &Indices) -> f64 {
        self.deviations(got).iter().map(|d| d * d).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indices {
    pub novelty: f64,
    pub reoccurrence: f64,
    pub surprise: f64,
}

/// Indices of the graph a plan produces, before any user filtering. Each
/// active tie-month becomes both ordered edges, so the undirected tie is the
/// edge identity here. Reoccurrence and surprise split at the validation
/// cutoff of the default split.
pub fn plan_indices(plan: &TiePlan, months: usize) -> Result<Indices> {
    let cutoff = Split::default_for(months)?.val_cutoff;
    let mut seen: HashSet<usize> = HashSet::new();
    let mut nov_sum = 0.0;
    let mut nov_months = 0usize;
    for t in 0..months {
        let active: Vec<usize> = (0..plan.ties.len()).filter(|&i| plan.active[i][t]).collect();
        if active.is_empty() {
            continue;
        }
        let novel = active.iter().filter(|i| !seen.contains(i)).count();
        nov_sum += novel as f64 / active.len() as f64;
        nov_months += 1;
        seen.extend(active);
    }
    if nov_months == 0 {
        return Err(crate::metrics::MetricsError::NoEdges.into());
    }
    let (mut dev, mut test, mut both) = (0usize, 0usize, 0usize);
    for row in &plan.active {
        let d = row[..cutoff].iter().any(|&a| a);
        let s = row[cutoff..].iter().any(|&a| a);
        dev += usize::from(d);
        test += usize::from(s);
        both += usize::from(d && s);
    }
    if dev == 0 {
        return Err(crate::metrics::MetricsError::EmptyDev.into());
    }
    if test == 0 {
        return Err(crate::metrics::MetricsError::EmptyTest.into());
    }
    Ok(Indices {
        novelty: nov_sum / nov_months as f64,
        reoccurrence: both as f64 / dev as f64,
        surprise: (test - both) as f64 / test as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub config: GenConfig,
    pub achieved: Indices,
    pub iterations: usize,
    pub converged: bool,
}

fn evaluate(cfg: &GenConfig) -> Result<Indices> {
    plan_indices(&plan_ties(cfg)?, cfg.n_months)
}

/// Coordinate search over `tie_persistence` and `novel_tie_rate`.
///
/// Iteration 1 measures the starting point; each further iteration tries a
/// step up and down along both knobs and halves the steps when neither
/// helps. Stops as soon as every index is within tolerance. When the budget
/// runs out the best configuration seen is returned with `converged = false`.
pub fn calibrate(
    config: &GenConfig,
    target: &CalibrationTarget,
    budget: usize,
) -> Result<CalibrationReport> {
    if budget == 0 {
        return Err(SynthError::ZeroBudget);
    }
    let mut best = config.clone();
    let mut best_idx = evaluate(&best)?;
    let mut best_loss = target.loss(&best_idx);
    let mut steps = [0.05, (config.novel_tie_rate * 0.5).max(0.004)];
    let mut iterations = 1;
    while !target.accepts(&best_idx) && iterations < budget {
        iterations += 1;
        let mut improved = false;
        for knob in 0..2 {
            for sign in [1.0, -1.0] {
                let mut cand = best.clone();
                let v = if knob == 0 {
                    &mut cand.tie_persistence
                } else {
                    &mut cand.novel_tie_rate
                };
                *v = (*v + sign * steps[knob]).clamp(0.0, 1.0);
                if cand == best {
                    continue;
                }
                let idx = evaluate(&cand)?;
                let loss = target.loss(&idx);
                if loss < best_loss {
                    (best, best_idx, best_loss) = (cand, idx, loss);
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            steps = steps.map(|s| s * 0.5);
        }
        info!(
            "calibration iteration {iterations}: persistence {:.4} rate {:.4} -> ({:.4}, {:.4}, {:.4})",
            best.tie_persistence,
            best.novel_tie_rate,
            best_idx.novelty,
            best_idx.reoccurrence,
            best_idx.surprise
        );
    }
    Ok(CalibrationReport {
        converged: target.accepts(&best_idx),
        config: best,
        achieved: best_idx,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GenConfig {
        GenConfig {
            n_nodes: 400,
            ..GenConfig::default()
        }
    }

    #[test]
    fn feasible_start_is_a_fixed_point() {
        let cfg = small();
        let idx = evaluate(&cfg).unwrap();
        let target = CalibrationTarget {
            novelty: idx.novelty,
            reoccurrence: idx.reoccurrence,
            surprise: idx.surprise,
            tolerance: [0.01; 3],
        };
        let rep = calibrate(&cfg, &target, 5).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.config, cfg);
    }

    #[test]
    fn exhausted_budget_is_flagged() {
        let cfg = GenConfig {
            tie_persistence: 0.2,
            novel_tie_rate: 0.3,
            ..small()
        };
        let rep = calibrate(&cfg, &CalibrationTarget::default(), 1).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 1);
        assert!(matches!(
            calibrate(&cfg, &CalibrationTarget::default(), 0),
            Err(SynthError::ZeroBudget)
        ));
    }

    #[test]
    fn search_recovers_from_far_start() {
        let cfg = GenConfig {
            tie_persistence: 0.6,
            novel_tie_rate: 0.04,
            ..small()
        };
        let rep = calibrate(&cfg, &CalibrationTarget::default(), 60).unwrap();
        assert!(rep.converged, "{:?}", rep.achieved);
    }
}
