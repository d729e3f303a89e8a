use hpscan::distributed::{imbalance, run_plan, speedup_bound, BoundKind, StrategyPlan};
use hpscan::exec::{self, Summary};
use hpscan::operators::{inputs, CostTable, ModularAffine, ModularAffineOp, DEFAULT_MODULUS};
use hpscan::sim::{critical_path, SimEnv};
use serde::Serialize;

use crate::config::{BackendArg, ExperimentConfig, ExperimentDefaults, Mode};
use crate::{report, Failure};

pub const DEFAULTS: ExperimentDefaults = ExperimentDefaults {
    n: 4096,
    ranks: 16,
    lanes: 1,
    reps: 3,
    cost: "unit",
};

/// Weak-scaling multipliers applied to both n and ranks.
pub const WEAK_FACTORS: [usize; 4] = [1, 2, 4, 8];

/// One CSV row. Times are seconds (virtual for the simulator).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub workers: usize,
    pub strategy: String,
    pub circuit: &'static str,
    pub backend: &'static str,
    pub mean_time: f64,
    pub sd: f64,
    pub ci95: f64,
    pub work: u64,
    /// Longest combine chain; empty for the executor, whose wall-clock
    /// traces carry no dependencies.
    pub depth: Option<u64>,
    pub imbalance: f64,
    pub speedup_vs_serial: f64,
    pub bound: Option<f64>,
    pub n: usize,
    pub ranks: usize,
    pub lanes: usize,
    pub seed: u64,
}

struct Measurement {
    /// Per-repetition times in ns.
    times: Vec<f64>,
    work: u64,
    depth: Option<u64>,
    imbalance: f64,
}

impl Measurement {
    fn summary(&self) -> Summary {
        if self.times.len() >= 2 {
            Summary::from_samples(&self.times)
        } else {
            Summary {
                runs: self.times.len(),
                mean: self.times.first().copied().unwrap_or(0.0),
                sd: 0.0,
                ci95: 0.0,
            }
        }
    }
}

fn values(n: usize, seed: u64) -> Vec<ModularAffine> {
    inputs::modular_affine(n, DEFAULT_MODULUS, seed as u32)
}

/// Runs `plan` once per repetition, repetition `i` using seed `seed + i`
/// for both the inputs and the cost streams.
fn measure(config: &ExperimentConfig, n: usize, plan: &StrategyPlan) -> Result<Measurement, Failure> {
    let op = ModularAffineOp::default();
    let segments = plan.assignment(n)?;
    let mut m = Measurement {
        times: Vec::with_capacity(config.reps),
        work: 0,
        depth: None,
        imbalance: 0.0,
    };
    for i in 0..config.reps.max(1) {
        let seed = config.seed + i as u64;
        let cost = config.cost.with_seed(seed);
        let xs = values(n, seed);
        let table = CostTable::generate(&cost, &segments.lengths());
        m.imbalance += imbalance(table.elements(), &segments);
        match config.backend {
            BackendArg::Sim => {
                let env = SimEnv { cost, ..config.env() };
                let (_, trace) = run_plan(&op, &xs, plan, &env)?;
                m.times.push(trace.makespan() as f64);
                if i == 0 {
                    m.work = trace.total_combines();
                    m.depth = Some(critical_path(&trace));
                }
            }
            BackendArg::Exec => {
                let cfg = config.exec_config(plan.ranks(), plan.lanes(), plan.dynamic);
                let (_, stats) = exec::run(&op, &xs, &exec::ExecConfig { cost, ..cfg })?;
                m.times.push(stats.wall.as_nanos() as f64);
                if i == 0 {
                    m.work = stats.trace.total_combines();
                }
            }
        }
    }
    m.imbalance /= config.reps.max(1) as f64;
    Ok(m)
}

/// Scaling points as (n, ranks).
pub fn points(config: &ExperimentConfig) -> Vec<(usize, usize)> {
    match config.mode {
        Mode::Strong => {
            let mut ranks: Vec<usize> = std::iter::successors(Some(1usize), |r| r.checked_mul(2))
                .take_while(|&r| r <= config.ranks)
                .collect();
            if ranks.last() != Some(&config.ranks) {
                ranks.push(config.ranks);
            }
            ranks.into_iter().map(|r| (config.n, r)).collect()
        }
        Mode::Weak => WEAK_FACTORS.iter().map(|&k| (config.n * k, config.ranks * k)).collect(),
    }
}

pub fn rows(config: &ExperimentConfig) -> Result<Vec<BenchRow>, Failure> {
    let c1 = config.global.log_depth_factor();
    let mut rows = Vec::new();
    for (n, ranks) in points(config) {
        let workers = ranks * config.lanes;
        if n < workers {
            report::log(format!("skipping n={n} ranks={ranks}: fewer elements than workers"));
            continue;
        }
        let serial = StrategyPlan::flat(config.strategy, 1, config.global);
        let baseline = measure(config, n, &serial)?.summary().mean;
        let mut variants = vec![false];
        if config.lanes > 1 {
            variants.push(true);
        } else {
            report::log(format!(
                "n={n} ranks={ranks}: dynamic rows need more than one lane; static only"
            ));
        }
        for dynamic in variants {
            let plan = config.plan(ranks, dynamic);
            if let Err(e) = plan.validate(n) {
                report::log(format!("skipping {}: {e}", plan.label()));
                continue;
            }
            let m = measure(config, n, &plan)?;
            let s = m.summary();
            rows.push(BenchRow {
                workers,
                strategy: if plan.hierarchy.is_some() {
                    format!(
                        "{}-{}",
                        config.strategy.name(),
                        if dynamic { "dynamic" } else { "static" }
                    )
                } else {
                    config.strategy.name().to_string()
                },
                circuit: config.global.name(),
                backend: config.backend.name(),
                mean_time: s.mean * 1e-9,
                sd: s.sd * 1e-9,
                ci95: s.ci95 * 1e-9,
                work: m.work,
                depth: m.depth,
                imbalance: m.imbalance,
                speedup_vs_serial: if s.mean > 0.0 { baseline / s.mean } else { 0.0 },
                bound: c1.map(|c| speedup_bound(BoundKind::Scan, n, workers, c)),
                n,
                ranks,
                lanes: config.lanes,
                seed: config.seed,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_bench(config: &ExperimentConfig) -> Result<(), Failure> {
    let rows = rows(config)?;
    report::write_csv(config.out.as_deref(), &rows)
}
