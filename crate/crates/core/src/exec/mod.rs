//! Real multi-threaded backend.
//!
//! Every worker is an OS thread. Operator costs are realised by busy work:
//! either spinning until the sampled duration has elapsed or repeating the
//! operator itself. Phases are separated by joining all worker threads;
//! ranks live in-process and exchange totals over channels. During the
//! first phase of a dynamic run, lanes of a rank share only the gap cursors
//! and their published processing rates.
//!
//! A cooperative watchdog bounds every run: all waiting and spinning loops
//! poll a deadline and the run fails with [`Error::Watchdog`] once it
//! passes.

mod run;
mod summary;

pub use run::{run, LaneStats, Stats};
pub use summary::{repeat_and_summarize, Summary};

use std::time::Duration;

use crate::circuits::CircuitKind;
use crate::distributed::StrategyPlan;
use crate::operators::CostModel;
use crate::{Error, Result};

/// How a sampled cost is turned into real work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Workload {
    /// Spin, yielding between polls, until the duration has elapsed.
    Spin,
    /// Apply the operator repeatedly until the duration has elapsed.
    Compose,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecConfig {
    pub ranks: usize,
    pub lanes: usize,
    /// Circuit over ranks; must be prefix-form when there are several.
    pub global: CircuitKind,
    /// Circuit over the lanes of a rank; defaults to `global`.
    pub local: Option<CircuitKind>,
    /// Balance the first phase by work stealing.
    pub dynamic: bool,
    pub cost: CostModel,
    pub workload: Workload,
    /// Pin workers to cores when the platform allows it.
    pub pin: bool,
    pub rate_window: usize,
    /// Upper bound on the run time; derived from the sampled costs when
    /// `None`.
    pub watchdog: Option<Duration>,
}

impl ExecConfig {
    pub fn new(ranks: usize, lanes: usize) -> Self {
        Self {
            ranks,
            lanes,
            global: CircuitKind::Dissemination,
            local: None,
            dynamic: false,
            cost: CostModel::Constant { t: 0 },
            workload: Workload::Spin,
            pin: false,
            rate_window: crate::sim::SimEnv::DEFAULT_RATE_WINDOW,
            watchdog: None,
        }
    }

    pub fn with_dynamic(mut self, dynamic: bool) -> Self {
        self.dynamic = dynamic;
        self
    }

    pub fn with_cost(mut self, cost: CostModel) -> Self {
        self.cost = cost;
        self
    }

    pub fn workers(&self) -> usize {
        self.ranks * self.lanes
    }

    /// The equivalent simulator plan.
    pub fn plan(&self) -> StrategyPlan {
        let plan = if self.dynamic {
            StrategyPlan::dynamic(self.ranks, self.lanes, self.global)
        } else {
            StrategyPlan::hierarchical(self.ranks, self.lanes, self.global)
        };
        StrategyPlan {
            local: self.local,
            ..plan
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.ranks == 0 || self.lanes == 0 {
            return Err(Error::InvalidConfig("ranks and lanes must be at least 1".into()));
        }
        if self.rate_window == 0 {
            return Err(Error::InvalidConfig("rate window must be at least 1".into()));
        }
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        self.plan().validate(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{inputs, sequential_scan, Int64Add, ModularAffineOp, DEFAULT_MODULUS};
    use crate::sim::{EventKind, Phase};

    #[test]
    fn single_worker_matches_oracle() {
        let xs = inputs::int64(100, 1);
        let (ys, stats) = run(&Int64Add, &xs, &ExecConfig::new(1, 1).with_dynamic(true)).unwrap();
        assert_eq!(ys, sequential_scan(&Int64Add, &xs).unwrap());
        assert_eq!(stats.steals, 0);
        assert_eq!(stats.trace.backend, crate::sim::Backend::Exec);
    }

    #[test]
    fn static_and_dynamic_match_oracle() {
        let op = ModularAffineOp::default();
        let xs = inputs::modular_affine(300, DEFAULT_MODULUS, 12);
        let oracle = sequential_scan(&op, &xs).unwrap();
        for (ranks, lanes) in [(1, 4), (3, 2), (2, 5), (4, 1)] {
            for dynamic in [false, true] {
                let config = ExecConfig::new(ranks, lanes).with_dynamic(dynamic);
                let (ys, stats) = run(&op, &xs, &config).unwrap();
                assert_eq!(ys, oracle);
                let ops: u64 = stats.lanes.iter().map(|l| l.ops).sum();
                assert_eq!(ops, (300 - ranks * lanes) as u64);
                let local2 = stats
                    .trace
                    .events_in(Phase::Local2)
                    .filter(|e| e.kind == EventKind::Combine)
                    .count();
                assert_eq!(local2, 300);
            }
        }
    }

    #[test]
    fn blelloch_is_allowed_inside_a_rank() {
        let op = ModularAffineOp::default();
        let xs = inputs::modular_affine(64, DEFAULT_MODULUS, 2);
        let config = ExecConfig {
            local: Some(crate::circuits::CircuitKind::Blelloch),
            ..ExecConfig::new(2, 3)
        };
        let (ys, _) = run(&op, &xs, &config).unwrap();
        assert_eq!(ys, sequential_scan(&op, &xs).unwrap());
    }

    #[test]
    fn spinning_takes_the_sampled_time() {
        let xs = inputs::int64(40, 1);
        let config = ExecConfig::new(1, 2).with_cost(CostModel::Constant { t: 200_000 });
        let (_, stats) = run(&Int64Add, &xs, &config).unwrap();
        // Each lane spins through 19 + 20 applications of 0.2 ms.
        assert!(stats.wall >= Duration::from_micros(39 * 200));
        assert!(stats.lanes.iter().all(|l| l.busy >= Duration::from_micros(39 * 200)));
    }

    #[test]
    fn compose_workload_runs() {
        let xs = inputs::int64(20, 1);
        let config = ExecConfig {
            workload: Workload::Compose,
            pin: true,
            ..ExecConfig::new(2, 2).with_cost(CostModel::Constant { t: 10_000 })
        };
        let (ys, _) = run(&Int64Add, &xs, &config).unwrap();
        assert_eq!(ys, sequential_scan(&Int64Add, &xs).unwrap());
    }

    #[test]
    fn watchdog_stops_overlong_runs() {
        let xs = inputs::int64(64, 1);
        let config = ExecConfig {
            watchdog: Some(Duration::from_millis(20)),
            ..ExecConfig::new(2, 2).with_cost(CostModel::Constant { t: 5_000_000 })
        };
        assert!(matches!(run(&Int64Add, &xs, &config), Err(Error::Watchdog(_))));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let xs = inputs::int64(8, 1);
        assert!(run(&Int64Add, &xs, &ExecConfig::new(3, 3)).is_err());
        assert!(run(&Int64Add, &xs, &ExecConfig::new(0, 3)).is_err());
        let blelloch = ExecConfig {
            global: crate::circuits::CircuitKind::Blelloch,
            ..ExecConfig::new(2, 2)
        };
        assert!(matches!(
            run(&Int64Add, &xs, &blelloch),
            Err(Error::UnsupportedCircuit { .. })
        ));
    }

    #[test]
    fn summary_arithmetic() {
        let s = Summary::from_samples(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.sd, 1.0);
        assert!((s.ci95 - 1.96 / 3f64.sqrt()).abs() < 1e-12);
        let flat = Summary::from_samples(&[4.0; 5]);
        assert_eq!((flat.sd, flat.ci95), (0.0, 0.0));
    }

    #[test]
    fn repeated_constant_runs_are_tight() {
        let xs = inputs::int64(64, 1);
        let config = ExecConfig::new(1, 2).with_cost(CostModel::Constant { t: 100_000 });
        let s = repeat_and_summarize(&Int64Add, &xs, &config, 5).unwrap();
        assert_eq!(s.runs, 5);
        assert!(2.0 * s.ci95 < 0.1 * s.mean, "{s:?}");
        assert!(repeat_and_summarize(&Int64Add, &xs, &config, 1).is_err());
    }
}
