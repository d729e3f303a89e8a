use hpscan::circuits::{build, evaluate, Circuit, CircuitKind};
use hpscan::distributed::{predict_plan, run_plan, Strategy, StrategyPlan};
use hpscan::exec;
use hpscan::operators::{
    first_mismatch, fold, inputs, sequential_scan, CostModel, CostTable, Counted, ModularAffine, ModularAffineOp,
    ScanOp, DEFAULT_MODULUS,
};
use hpscan::sim::{critical_path, work_account, SimEnv};
use hpscan::stealing::steal_reduce;
use serde::Serialize;

use crate::config::{BackendArg, ExperimentConfig, ExperimentDefaults};
use crate::{report, Failure};

pub const DEFAULTS: ExperimentDefaults = ExperimentDefaults {
    n: 256,
    ranks: 16,
    lanes: 4,
    reps: 3,
    cost: "exp:100",
};

#[derive(Debug, Clone, Serialize)]
pub struct PropertyFailure {
    pub property: String,
    pub seed: u64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: usize,
    pub failures: Vec<PropertyFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub circuits: Vec<&'static str>,
    pub suites: Vec<SuiteReport>,
}

struct Suite {
    report: SuiteReport,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Self {
            report: SuiteReport {
                name,
                checks: 0,
                failures: Vec::new(),
            },
        }
    }

    fn check(&mut self, ok: bool, property: impl FnOnce() -> String, seed: u64, detail: impl FnOnce() -> String) {
        self.report.checks += 1;
        if !ok {
            self.report.failures.push(PropertyFailure {
                property: property(),
                seed,
                detail: detail(),
            });
        }
    }

    fn fail(&mut self, property: String, seed: u64, detail: String) {
        self.check(false, || property, seed, || detail);
    }
}

struct Verifier<'a> {
    config: &'a ExperimentConfig,
    kinds: Vec<CircuitKind>,
    seeds: Vec<u64>,
    inject_fault: bool,
    op: ModularAffineOp,
}

fn values(n: usize, seed: u64) -> Vec<ModularAffine> {
    inputs::modular_affine(n, DEFAULT_MODULUS, seed as u32)
}

/// Drops the last combining gate of the deepest stage that has one.
fn break_circuit(circuit: &mut Circuit) {
    let target = circuit
        .stages()
        .iter()
        .enumerate()
        .rev()
        .find_map(|(s, stage)| stage.iter().rposition(|g| g.is_combine()).map(|i| (s, i)));
    if let Some((s, i)) = target {
        circuit.remove_gate(s, i);
    }
}

fn powers_up_to(limit: usize) -> impl Iterator<Item = usize> {
    std::iter::successors(Some(1usize), |p| p.checked_mul(2)).take_while(move |&p| p <= limit)
}

impl Verifier<'_> {
    fn circuit_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = [1, 2, 3, 7, 16, 33]
            .into_iter()
            .filter(|&s| s < self.config.n)
            .collect();
        sizes.push(self.config.n);
        sizes
    }

    /// Flat plans over every strategy and circuit, with power-of-two and
    /// one uneven worker count.
    fn flat_plans(&self) -> Vec<StrategyPlan> {
        let n = self.config.n;
        let mut counts: Vec<usize> = powers_up_to(self.config.ranks.min(n)).collect();
        if n >= 3 && !counts.contains(&3) {
            counts.push(3);
        }
        let mut plans = Vec::new();
        for strategy in Strategy::ALL {
            for &kind in &self.kinds {
                for &p in &counts {
                    plans.push(StrategyPlan::flat(strategy, p, kind));
                }
            }
        }
        plans
    }

    /// Static and stealing ranks × lanes plans.
    fn hierarchical_plans(&self) -> Vec<StrategyPlan> {
        let lanes = self.config.lanes.max(2);
        let mut plans = Vec::new();
        for ranks in [1, 2, 4] {
            if self.config.n < ranks * lanes {
                continue;
            }
            for &kind in &self.kinds {
                if ranks > 1 && !kind.is_prefix_form() {
                    continue;
                }
                let base = StrategyPlan::hierarchical(ranks, lanes, kind);
                let base = match self.config.local {
                    Some(local) => base.with_local(local),
                    None => base,
                };
                plans.push(base.clone());
                plans.push(StrategyPlan { dynamic: true, ..base });
            }
        }
        plans
    }

    fn oracle(&self) -> SuiteReport {
        let mut suite = Suite::new("oracle-equivalence");
        let op = &self.op;
        for &seed in &self.seeds {
            for &kind in &self.kinds {
                for size in self.circuit_sizes() {
                    let xs = values(size, seed);
                    let expected = sequential_scan(op, &xs).expect("non-empty");
                    let property = || format!("circuit-oracle/{kind}/n={size}");
                    let mut circuit = match build(kind, size) {
                        Ok(c) => c,
                        Err(e) => {
                            suite.fail(property(), seed, e.to_string());
                            continue;
                        }
                    };
                    if self.inject_fault {
                        break_circuit(&mut circuit);
                    }
                    match evaluate(&circuit, op, &xs) {
                        Ok(ys) => {
                            let bad = first_mismatch(op, &ys, &expected);
                            suite.check(bad.is_none(), property, seed, || {
                                format!("first mismatch at index {bad:?}")
                            });
                        }
                        Err(e) => suite.fail(property(), seed, e.to_string()),
                    }
                }
            }

            let xs = values(self.config.n, seed);
            let expected = sequential_scan(op, &xs).expect("non-empty");
            let env = SimEnv {
                cost: self.config.cost.with_seed(seed),
                ..self.config.env()
            };
            for plan in self.flat_plans().into_iter().chain(self.hierarchical_plans()) {
                let property = || format!("plan-oracle/{}", plan.label());
                match run_plan(op, &xs, &plan, &env) {
                    Ok((ys, _)) => {
                        let bad = first_mismatch(op, &ys, &expected);
                        suite.check(bad.is_none(), property, seed, || {
                            format!("first mismatch at index {bad:?}")
                        });
                    }
                    Err(e) => suite.fail(property(), seed, e.to_string()),
                }
            }

            if self.config.backend == BackendArg::Exec {
                for plan in self.hierarchical_plans() {
                    let h = plan.hierarchy.expect("hierarchical");
                    let mut cfg = self.config.exec_config(h.ranks, h.lanes, plan.dynamic);
                    cfg.global = plan.global;
                    cfg.cost = cfg.cost.with_seed(seed);
                    let property = || format!("exec-oracle/{}", plan.label());
                    match exec::run(op, &xs, &cfg) {
                        Ok((ys, _)) => {
                            let bad = first_mismatch(op, &ys, &expected);
                            suite.check(bad.is_none(), property, seed, || {
                                format!("first mismatch at index {bad:?}")
                            });
                        }
                        Err(e) => suite.fail(property(), seed, e.to_string()),
                    }
                }
            }
        }
        suite.report
    }

    /// Unit-cost simulated depth and counted work against the closed forms,
    /// for every evenly dividing static plan.
    fn formula(&self) -> SuiteReport {
        let mut suite = Suite::new("work-depth-formula");
        let seed = self.config.seed;
        let n = self.config.n;
        let xs = values(n, seed);
        let counted = Counted::new(self.op);
        for &kind in &self.kinds {
            for size in self.circuit_sizes() {
                let circuit = match build(kind, size) {
                    Ok(c) => c,
                    Err(e) => {
                        suite.fail(format!("circuit-work/{kind}/n={size}"), seed, e.to_string());
                        continue;
                    }
                };
                counted.reset();
                let _ = evaluate(&circuit, &counted, &xs[..size]);
                let work = circuit.metrics().work;
                suite.check(
                    counted.calls() == work,
                    || format!("circuit-work/{kind}/n={size}"),
                    seed,
                    || format!("{} combines evaluated, {work} counted", counted.calls()),
                );
            }
        }

        let env = SimEnv::default();
        let plans = self
            .flat_plans()
            .into_iter()
            .chain(self.hierarchical_plans().into_iter().filter(|p| !p.dynamic));
        for plan in plans.filter(|p| n % p.workers == 0) {
            let predicted = match predict_plan(&plan, n) {
                Ok(p) => p,
                Err(e) => {
                    suite.fail(format!("predict/{}", plan.label()), seed, e.to_string());
                    continue;
                }
            };
            let trace = match run_plan(&self.op, &xs, &plan, &env) {
                Ok((_, trace)) => trace,
                Err(e) => {
                    suite.fail(format!("simulate/{}", plan.label()), seed, e.to_string());
                    continue;
                }
            };
            let depth = critical_path(&trace);
            suite.check(
                depth == predicted.depth,
                || format!("depth/{}", plan.label()),
                seed,
                || format!("simulated {depth}, predicted {}", predicted.depth),
            );
            suite.check(
                trace.makespan() == predicted.depth,
                || format!("makespan/{}", plan.label()),
                seed,
                || {
                    format!(
                        "unit-cost makespan {}, predicted depth {}",
                        trace.makespan(),
                        predicted.depth
                    )
                },
            );
            let (l1, g, l2) = work_account(&trace).components();
            let want = (predicted.local1.work, predicted.global.work, predicted.local2.work);
            suite.check(
                (l1, g, l2) == want && l1 + g + l2 == predicted.work,
                || format!("work/{}", plan.label()),
                seed,
                || {
                    format!(
                        "counted {:?}, predicted {:?} (total {})",
                        (l1, g, l2),
                        want,
                        predicted.work
                    )
                },
            );
        }
        suite.report
    }

    /// Every element of a rank segment is folded by exactly one lane, into
    /// contiguous ranges, when lanes steal from each other.
    fn exactly_once(&self) -> SuiteReport {
        let mut suite = Suite::new("exactly-once");
        let n = self.config.n;
        let lanes = self.config.lanes.max(2).min(n);
        let op = &self.op;
        for &seed in &self.seeds {
            let xs = values(n, seed);
            let model = match self.config.cost {
                CostModel::Constant { .. } => CostModel::Exponential { mean: 100, seed },
                other => other.with_seed(seed),
            };
            let lengths: Vec<usize> = (0..lanes).map(|l| n / lanes + usize::from(l < n % lanes)).collect();
            let costs = CostTable::generate(&model, &lengths);
            let property = || format!("exactly-once/n={n}/lanes={lanes}");
            let outcomes = match steal_reduce(op, &xs, 0..n, lanes, &costs, self.config.window) {
                Ok((outcomes, _)) => outcomes,
                Err(e) => {
                    suite.fail(property(), seed, e.to_string());
                    continue;
                }
            };
            let mut next = 0;
            let mut detail = None;
            for o in &outcomes {
                if o.range.start != next || o.range.is_empty() {
                    detail = Some(format!("lane {} range {:?} does not start at {next}", o.lane, o.range));
                    break;
                }
                let expected = fold(op, &xs[o.range.clone()]).expect("non-empty");
                if !op.same(&o.value, &expected) {
                    detail = Some(format!("lane {} value differs from the fold of {:?}", o.lane, o.range));
                    break;
                }
                next = o.range.end;
            }
            if detail.is_none() && next != n {
                detail = Some(format!("ranges end at {next}, not {n}"));
            }
            let ops: u64 = outcomes.iter().map(|o| o.ops).sum();
            if detail.is_none() && ops != (n - lanes) as u64 {
                detail = Some(format!("{ops} combines, expected {}", n - lanes));
            }
            suite.check(detail.is_none(), property, seed, || detail.clone().unwrap_or_default());
        }
        suite.report
    }
}

pub fn verify(config: &ExperimentConfig, all_circuits: bool, inject_fault: bool) -> VerifyReport {
    let kinds = if all_circuits {
        CircuitKind::ALL.to_vec()
    } else {
        vec![config.global]
    };
    let seeds = (0..config.reps.max(1) as u64).map(|i| config.seed + i).collect();
    let v = Verifier {
        config,
        kinds,
        seeds,
        inject_fault,
        op: ModularAffineOp::default(),
    };
    let suites = vec![v.oracle(), v.formula(), v.exactly_once()];
    VerifyReport {
        passed: suites.iter().all(|s| s.failures.is_empty()),
        n: config.n,
        seeds: v.seeds.clone(),
        circuits: v.kinds.iter().map(|k| k.name()).collect(),
        suites,
    }
}

pub fn cmd_verify(config: &ExperimentConfig, all_circuits: bool, inject_fault: bool) -> Result<(), Failure> {
    let report = verify(config, all_circuits, inject_fault);
    report::write_json(config.out.as_deref(), &report)?;
    let failures: Vec<&PropertyFailure> = report.suites.iter().flat_map(|s| &s.failures).collect();
    for f in &failures {
        report::log(format!("FAILED {} (seed {}): {}", f.property, f.seed, f.detail));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Property(failures.len()))
    }
}
