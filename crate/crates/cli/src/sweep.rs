use hpscan::distributed::{imbalance, partition};
use hpscan::operators::{inputs, CostModel, CostTable, ModularAffineOp, DEFAULT_MODULUS};
use hpscan::stealing::{reduce_makespan, static_reduce, steal_reduce};
use serde::Serialize;

use crate::config::{BackendArg, ExperimentConfig, ExperimentDefaults, UsageError};
use crate::{report, Failure};

pub const DEFAULTS: ExperimentDefaults = ExperimentDefaults {
    n: 12 * 1024,
    ranks: 1,
    lanes: 12,
    reps: 20,
    cost: "exp:100",
};

/// Elements per lane, largest first.
pub const SEGMENTS: [usize; 6] = [1024, 512, 256, 128, 64, 32];

/// Mean first-phase makespans of one rank, in ns, over `reps` seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub segment: usize,
    pub lanes: usize,
    pub n: usize,
    pub cost: String,
    pub imbalance: f64,
    pub static_makespan: f64,
    pub dynamic_makespan: f64,
    pub ratio: f64,
    pub dynamic_wins: usize,
    pub reps: usize,
    pub seed: u64,
}

/// The segment sizes to sweep: the fixed ladder, or only `n / lanes`
/// when `n` was given.
fn segments(config: &ExperimentConfig) -> Vec<usize> {
    if config.n_given {
        vec![config.n / config.lanes]
    } else {
        SEGMENTS.to_vec()
    }
}

pub fn rows(config: &ExperimentConfig) -> Result<Vec<SweepRow>, Failure> {
    if config.backend != BackendArg::Sim {
        return Err(UsageError("sweep runs on the sim backend only".into()).into());
    }
    if matches!(config.cost, CostModel::Constant { .. }) {
        report::log("constant costs leave nothing to balance; expect ratio 1");
    }
    let op = ModularAffineOp::default();
    let lanes = config.lanes;
    let reps = config.reps.max(1);
    let mut rows = Vec::new();
    for segment in segments(config) {
        let n = segment * lanes;
        let split = partition(n, lanes)?;
        let (mut stat, mut dyn_, mut imb, mut wins) = (0.0, 0.0, 0.0, 0);
        for i in 0..reps {
            let seed = config.seed + i as u64;
            let xs = inputs::modular_affine(n, DEFAULT_MODULUS, seed as u32);
            let costs = CostTable::generate(&config.cost.with_seed(seed), &split.lengths());
            let (s, _) = static_reduce(&op, &xs, 0..n, lanes, &costs)?;
            let (d, _) = steal_reduce(&op, &xs, 0..n, lanes, &costs, config.window)?;
            let (s, d) = (reduce_makespan(&s), reduce_makespan(&d));
            stat += s as f64;
            dyn_ += d as f64;
            wins += usize::from(d < s);
            imb += imbalance(costs.elements(), &split);
        }
        let reps_f = reps as f64;
        rows.push(SweepRow {
            segment,
            lanes,
            n,
            cost: config.cost.spec(),
            imbalance: imb / reps_f,
            static_makespan: stat / reps_f,
            dynamic_makespan: dyn_ / reps_f,
            ratio: dyn_ / stat,
            dynamic_wins: wins,
            reps,
            seed: config.seed,
        });
    }
    Ok(rows)
}

pub fn cmd_sweep(config: &ExperimentConfig) -> Result<(), Failure> {
    let rows = rows(config)?;
    report::write_csv(config.out.as_deref(), &rows)
}
