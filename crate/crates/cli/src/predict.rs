use hpscan::distributed::{predict, predict_hierarchical, speedup_bound, BoundKind};
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentDefaults, UsageError};
use crate::report;
use crate::Failure;

pub const DEFAULTS: ExperimentDefaults = ExperimentDefaults {
    n: 4096,
    ranks: 1024,
    lanes: 1,
    reps: 1,
    cost: "unit",
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictRow {
    pub n: usize,
    pub ranks: usize,
    pub lanes: usize,
    pub workers: usize,
    pub strategy: &'static str,
    pub circuit: &'static str,
    pub local_circuit: &'static str,
    pub depth: u64,
    pub work: u64,
    pub local1_work: u64,
    pub global_work: u64,
    pub local2_work: u64,
    pub bound_scan: Option<f64>,
    pub bound_full: Option<f64>,
}

/// Rank counts 1, 2, 4, … up to `config.ranks` whose worker count divides n.
pub fn grid(config: &ExperimentConfig) -> Vec<usize> {
    std::iter::successors(Some(1usize), |r| r.checked_mul(2))
        .take_while(|&r| r <= config.ranks)
        .filter(|&r| config.n % (r * config.lanes) == 0)
        .collect()
}

pub fn rows(config: &ExperimentConfig) -> Result<Vec<PredictRow>, Failure> {
    if config.n % config.lanes != 0 {
        return Err(UsageError(format!("n = {} does not divide over {} lanes", config.n, config.lanes)).into());
    }
    let local = config.local.unwrap_or(config.global);
    let c1 = config.global.log_depth_factor();
    let mut rows = Vec::new();
    for ranks in grid(config) {
        let workers = ranks * config.lanes;
        let p = if config.lanes > 1 {
            predict_hierarchical(config.n, ranks, config.lanes, config.global, local)
        } else {
            predict(config.strategy, config.n, ranks, config.global)
        };
        let p = p.map_err(|e| UsageError(e.to_string()))?;
        rows.push(PredictRow {
            n: config.n,
            ranks,
            lanes: config.lanes,
            workers,
            strategy: config.strategy.name(),
            circuit: config.global.name(),
            local_circuit: local.name(),
            depth: p.depth,
            work: p.work,
            local1_work: p.local1.work,
            global_work: p.global.work,
            local2_work: p.local2.work,
            bound_scan: c1.map(|c| speedup_bound(BoundKind::Scan, config.n, workers, c)),
            bound_full: c1.map(|c| speedup_bound(BoundKind::Full, config.n, workers, c)),
        });
    }
    Ok(rows)
}

pub fn cmd_predict(config: &ExperimentConfig) -> Result<(), Failure> {
    let rows = rows(config)?;
    report::write_csv(config.out.as_deref(), &rows)
}
