//! Deterministic discrete-event backend.
//!
//! Workers advance private virtual clocks in integer nanoseconds. Each
//! operator application takes its sampled cost, messages arrive after a
//! configurable latency and barriers release when the last participant
//! arrives. Runs are pure functions of their configuration.

mod analysis;
mod config;
mod timeline;
mod trace;

pub use analysis::{critical_path, work_account, WorkBreakdown};
pub use config::{parse_kv, simulate, SimConfig};
pub use timeline::{Message, Timeline};
pub use trace::{Backend, Event, EventKind, Phase, Trace, TraceSummary, CSV_HEADER};

use crate::operators::CostModel;
use crate::Nanos;

/// Execution environment of a simulated run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEnv {
    pub cost: CostModel,
    /// Delay of every message between ranks.
    pub latency: Nanos,
    /// Run one preprocessing step per element before the scan.
    pub preprocess: bool,
    /// Number of recent operations a stealing lane averages to report its
    /// processing rate.
    pub rate_window: usize,
}

impl SimEnv {
    pub const DEFAULT_RATE_WINDOW: usize = 2;

    pub fn new(cost: CostModel) -> Self {
        Self {
            cost,
            ..Self::default()
        }
    }
}

impl Default for SimEnv {
    fn default() -> Self {
        Self {
            cost: CostModel::UNIT,
            latency: 0,
            preprocess: false,
            rate_window: Self::DEFAULT_RATE_WINDOW,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::CircuitKind;
    use crate::distributed::{predict, run_plan, Strategy, StrategyPlan};
    use crate::operators::{inputs, Int64Add};

    fn rts(n: usize, p: usize) -> SimConfig {
        SimConfig::new(
            n,
            StrategyPlan::flat(Strategy::ReduceThenScan, p, CircuitKind::Dissemination),
        )
    }

    #[test]
    fn unit_cost_makespan_is_depth() {
        let trace = simulate(&rts(16, 4)).unwrap();
        assert_eq!(trace.makespan(), 9);
        assert_eq!(critical_path(&trace), 9);
    }

    #[test]
    fn makespan_matches_prediction_on_even_plans() {
        for n in [16, 64, 256] {
            for p in [2, 4, 8, 16] {
                for strategy in Strategy::ALL {
                    for kind in CircuitKind::ALL {
                        let config = SimConfig::new(n, StrategyPlan::flat(strategy, p, kind));
                        let trace = simulate(&config).unwrap();
                        let predicted = predict(strategy, n, p, kind).unwrap();
                        assert_eq!(trace.makespan(), predicted.depth, "{}", config.plan.label());
                        let w = work_account(&trace);
                        assert_eq!(
                            w.components(),
                            (predicted.local1.work, predicted.global.work, predicted.local2.work)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn zero_cost_makespan_is_zero() {
        let mut config = rts(64, 4);
        config.env.cost = CostModel::Constant { t: 0 };
        assert_eq!(simulate(&config).unwrap().makespan(), 0);
    }

    #[test]
    fn critical_path_examples() {
        let seq = SimConfig::new(8, StrategyPlan::flat(Strategy::ScanThenMap, 1, CircuitKind::Sequential));
        assert_eq!(critical_path(&simulate(&seq).unwrap()), 7);
        let stm = SimConfig::new(
            16,
            StrategyPlan::flat(Strategy::ScanThenMap, 4, CircuitKind::Dissemination),
        );
        assert_eq!(critical_path(&simulate(&stm).unwrap()), 8);
        let mut tl = Timeline::new(1, 0);
        tl.combine(0, 5, None, None);
        assert_eq!(critical_path(&tl.into_trace(Backend::Sim, 5)), 1);
    }

    #[test]
    fn single_worker_breakdown() {
        let w = work_account(&simulate(&rts(50, 1)).unwrap());
        assert_eq!(w.components(), (49, 0, 0));
        assert_eq!(w.total, 49);
    }

    #[test]
    fn identical_configs_give_identical_csv() {
        let mut config = rts(300, 6);
        config.env.cost = CostModel::Exponential { mean: 10_000, seed: 3 };
        let a = simulate(&config).unwrap().to_csv();
        let b = simulate(&config).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
    }

    #[test]
    fn per_worker_events_do_not_overlap() {
        let mut config = SimConfig::new(200, StrategyPlan::dynamic(3, 4, CircuitKind::LadnerFischer));
        config.env.cost = CostModel::Exponential { mean: 100, seed: 8 };
        config.env.latency = 7;
        let trace = simulate(&config).unwrap();
        let mut clock = vec![0; trace.workers];
        for e in &trace.events {
            assert!(e.start >= clock[e.worker] && e.end >= e.start, "{e:?}");
            clock[e.worker] = e.end;
        }
    }

    #[test]
    fn energy_proxy_tracks_busy_time() {
        let mut config = SimConfig::new(
            1 << 16,
            StrategyPlan::flat(Strategy::ReduceThenScan, 16, CircuitKind::Dissemination),
        );
        config.env.cost = CostModel::Exponential { mean: 1000, seed: 11 };
        let s = simulate(&config).unwrap().summary();
        let rel = (s.energy_proxy_ns as f64 - s.busy_ns as f64).abs() / s.busy_ns as f64;
        assert!(rel < 0.01, "{rel}");
    }

    #[test]
    fn preprocessing_adds_one_step_per_element() {
        let mut config = rts(64, 4);
        config.env.preprocess = true;
        let trace = simulate(&config).unwrap();
        let w = work_account(&trace);
        assert_eq!(w.preprocess, 64);
        assert_eq!(trace.makespan(), 16 + 2 * 16 - 1 + 2);
    }

    #[test]
    fn summary_json_has_backend_and_phases() {
        let json = simulate(&rts(16, 4)).unwrap().summary_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["backend"], "sim");
        assert_eq!(v["makespan_ns"], 9);
        assert_eq!(v["phases"]["local2"], 16);
    }

    #[test]
    fn config_round_trips() {
        let text = "# experiment\nn = 512\npprime = 4\nt = 4\ndynamic = true\nglobal = lf\ncost = exp:10ms\nseed = 7\n";
        let config = SimConfig::parse(text).unwrap();
        assert_eq!(config.plan, StrategyPlan::dynamic(4, 4, CircuitKind::LadnerFischer));
        assert_eq!(
            config.env.cost,
            CostModel::Exponential {
                mean: 10_000_000,
                seed: 7
            }
        );
        assert_eq!(SimConfig::parse(&config.to_kv()).unwrap(), config);
        assert!(SimConfig::parse("n = 4\np = 8\n").is_err());
        assert!(SimConfig::parse("n = 16\npprime = 2\nt = 2\np = 5\n").is_err());
        assert!(parse_kv("n 16").is_err());
    }

    #[test]
    fn static_and_dynamic_draw_identical_costs() {
        let xs = inputs::int64(480, 5);
        let env = SimEnv::new(CostModel::Exponential { mean: 50, seed: 2 });
        let plan = StrategyPlan::dynamic(2, 6, CircuitKind::Dissemination);
        let (_, dynamic) = run_plan(&Int64Add, &xs, &plan, &env).unwrap();
        let (_, fixed) = run_plan(&Int64Add, &xs, &plan.to_static(), &env).unwrap();
        let costs = |t: &Trace| {
            let mut c: Vec<_> = t
                .events_in(Phase::Local1)
                .filter(|e| e.kind == EventKind::Combine)
                .map(|e| (e.src.unwrap(), e.end - e.start))
                .collect();
            c.sort();
            c
        };
        // Same element, same cost, whichever lane ends up folding it.
        let d = costs(&dynamic);
        let s = costs(&fixed);
        for (i, c) in &d {
            if let Ok(k) = s.binary_search_by_key(i, |x| x.0) {
                assert_eq!(s[k].1, *c);
            }
        }
        assert_eq!(work_account(&dynamic).total, work_account(&fixed).total);
    }
}
