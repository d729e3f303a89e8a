use std::ops::Range;

use super::partition::SegmentAssignment;
use super::plan::{Strategy, StrategyPlan};
use crate::circuits::{build, Circuit, Gate};
use crate::operators::{CostStream, CostTable, ScanOp};
use crate::sim::{Backend, Phase, SimEnv, Timeline, Trace};
use crate::{Error, Result};

/// State shared by the phases of one simulated run.
pub(crate) struct Run {
    pub tl: Timeline,
    pub costs: CostTable,
    pub aux: Vec<CostStream>,
    pub segments: SegmentAssignment,
}

impl Run {
    /// Validates the plan, draws the element costs of the static leaf
    /// segments and runs the preprocessing phase when enabled.
    pub fn start(plan: &StrategyPlan, n: usize, env: &SimEnv) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let segments = plan.assignment(n)?;
        let costs = CostTable::generate(&env.cost, &segments.lengths());
        let aux = costs.aux_streams(plan.workers);
        let mut run = Self {
            tl: Timeline::new(plan.workers, env.latency),
            costs,
            aux,
            segments,
        };
        if env.preprocess {
            run.tl.set_phase(Phase::Preprocess);
            for w in 0..plan.workers {
                for i in run.segments.range(w) {
                    run.tl.map(w, run.costs.element(i), i);
                }
            }
            run.tl.barrier_all();
        }
        run.tl.set_phase(Phase::Local1);
        Ok(run)
    }

    pub fn finish(self, env: &SimEnv) -> Trace {
        self.tl.into_trace(Backend::Sim, env.cost.mean().round() as u64)
    }

    /// Folds `xs[range]` left to right on `worker`; the first element is
    /// the initial value.
    pub fn reduce<O: ScanOp>(&mut self, op: &O, xs: &[O::Value], worker: usize, range: Range<usize>) -> O::Value {
        let mut acc = xs[range.start].clone();
        for i in range.start + 1..range.end {
            self.tl.combine(worker, self.costs.element(i), Some(i), None);
            acc = op.combine(&acc, &xs[i]);
        }
        acc
    }

    /// Inclusive scan of `xs[range]` into `ys[range]`, starting from
    /// `prefix` when given.
    pub fn scan<O: ScanOp>(
        &mut self,
        op: &O,
        xs: &[O::Value],
        ys: &mut [O::Value],
        worker: usize,
        range: Range<usize>,
        prefix: Option<&O::Value>,
    ) {
        let l = range.start;
        ys[l] = match prefix {
            Some(p) => {
                self.tl.combine(worker, self.costs.element(l), Some(l), Some(l));
                op.combine(p, &xs[l])
            }
            None => xs[l].clone(),
        };
        for i in l + 1..range.end {
            self.tl.combine(worker, self.costs.element(i), Some(i), Some(i));
            ys[i] = op.combine(&ys[i - 1], &xs[i]);
        }
    }

    /// Runs `circuit` over `values`, data slot `s` living on worker
    /// `worker_of(s)`. Each stage ends with a barrier among those workers.
    /// Cross-worker reads are messages between ranks when `remote`, shared
    /// memory hand-offs otherwise.
    pub fn circuit<O: ScanOp>(
        &mut self,
        op: &O,
        circuit: &Circuit,
        values: Vec<O::Value>,
        worker_of: impl Fn(usize) -> usize,
        remote: bool,
    ) -> Result<Vec<O::Value>> {
        let n = circuit.n();
        let workers: Vec<usize> = (0..n).map(&worker_of).collect();
        let owner = |slot: usize| workers[circuit.home(slot)];
        let mut slots: Vec<Option<O::Value>> = values.into_iter().map(Some).collect();
        slots.resize(circuit.slots(), None);
        let read = |slots: &[Option<O::Value>], s: usize| -> Result<O::Value> {
            slots[s]
                .clone()
                .ok_or_else(|| Error::InvalidPlan(format!("slot {s} read before it was written")))
        };
        for stage in circuit.stages() {
            let snapshot = slots.clone();
            let messages: Vec<_> = stage
                .iter()
                .map(|g| {
                    let src = g.src()?;
                    let (from, to) = (owner(src), owner(g.dst()));
                    (from != to).then(|| {
                        if remote {
                            self.tl.send(from, to)
                        } else {
                            self.tl.share(from, to)
                        }
                    })
                })
                .collect();
            for (g, msg) in stage.iter().zip(messages) {
                let w = owner(g.dst());
                if let Some(msg) = msg {
                    self.tl.recv(w, msg);
                }
                let v = match *g {
                    Gate::Prepend { src, dst } => {
                        self.tl.combine(w, self.aux[w].sample(), Some(src), Some(dst));
                        op.combine(&read(&snapshot, src)?, &read(&snapshot, dst)?)
                    }
                    Gate::Append { src, dst } => {
                        self.tl.combine(w, self.aux[w].sample(), Some(src), Some(dst));
                        op.combine(&read(&snapshot, dst)?, &read(&snapshot, src)?)
                    }
                    Gate::Copy { src, .. } => read(&snapshot, src)?,
                    Gate::Identity { .. } => op.identity().ok_or(Error::MissingIdentity("identity gates"))?,
                };
                slots[g.dst()] = Some(v);
            }
            self.tl.barrier(workers.iter().copied());
        }
        slots
            .into_iter()
            .take(n)
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::InvalidPlan(format!("output slot {i} never written"))))
            .collect()
    }

    /// Second phase of reduce-then-scan: worker `w` takes the inclusive
    /// prefix of worker `w − 1` and rescans its segment from it. Worker 0
    /// starts from the identity when the operator has one.
    pub fn rescan<O: ScanOp>(
        &mut self,
        op: &O,
        xs: &[O::Value],
        inclusive: &[O::Value],
        ranges: &[Range<usize>],
        lanes: usize,
    ) -> Vec<O::Value> {
        self.tl.set_phase(Phase::Local2);
        let mut ys = xs.to_vec();
        let messages: Vec<_> = (1..ranges.len())
            .map(|w| {
                if w % lanes == 0 {
                    self.tl.send(w - 1, w)
                } else {
                    self.tl.share(w - 1, w)
                }
            })
            .collect();
        let identity = op.identity();
        for (w, range) in ranges.iter().enumerate() {
            let prefix = if w == 0 {
                identity.as_ref()
            } else {
                self.tl.recv(w, messages[w - 1]);
                Some(&inclusive[w - 1])
            };
            self.scan(op, xs, &mut ys, w, range.clone(), prefix);
        }
        ys
    }
}

fn serial<O: ScanOp>(run: &mut Run, op: &O, xs: &[O::Value]) -> Vec<O::Value> {
    let mut ys = xs.to_vec();
    run.scan(op, xs, &mut ys, 0, 0..xs.len(), None);
    ys
}

/// Local scans, a global circuit over the segment totals, then every worker
/// but the first prepends its exclusive prefix to all but its last element,
/// whose value the global phase already produced.
pub fn scan_then_map<O: ScanOp>(
    op: &O,
    xs: &[O::Value],
    plan: &StrategyPlan,
    env: &SimEnv,
) -> Result<(Vec<O::Value>, Trace)> {
    if plan.strategy != Strategy::ScanThenMap || plan.hierarchy.is_some() {
        return Err(Error::InvalidPlan(format!(
            "{} is not a flat scan-then-map plan",
            plan.label()
        )));
    }
    let mut run = Run::start(plan, xs.len(), env)?;
    if plan.workers == 1 {
        let ys = serial(&mut run, op, xs);
        return Ok((ys, run.finish(env)));
    }
    let ranges = run.segments.ranges().to_vec();
    let mut ys = xs.to_vec();
    for (w, r) in ranges.iter().enumerate() {
        run.scan(op, xs, &mut ys, w, r.clone(), None);
    }
    run.tl.barrier_all();

    run.tl.set_phase(Phase::Global);
    let circuit = build(plan.global, plan.workers)?;
    let totals = ranges.iter().map(|r| ys[r.end - 1].clone()).collect();
    let inclusive = run.circuit(op, &circuit, totals, |s| s, true)?;
    run.tl.barrier_all();

    run.tl.set_phase(Phase::Local2);
    let messages: Vec<_> = (1..plan.workers).map(|w| run.tl.send(w - 1, w)).collect();
    for (w, r) in ranges.iter().enumerate().skip(1) {
        run.tl.recv(w, messages[w - 1]);
        let prefix = &inclusive[w - 1];
        for i in r.start..r.end - 1 {
            run.tl.combine(w, run.costs.element(i), Some(i), Some(i));
            ys[i] = op.combine(prefix, &ys[i]);
        }
        ys[r.end - 1] = inclusive[w].clone();
    }
    Ok((ys, run.finish(env)))
}

/// Local reductions, a global circuit over the segment totals, then every
/// worker rescans its segment starting from its exclusive prefix.
pub fn reduce_then_scan<O: ScanOp>(
    op: &O,
    xs: &[O::Value],
    plan: &StrategyPlan,
    env: &SimEnv,
) -> Result<(Vec<O::Value>, Trace)> {
    if plan.strategy != Strategy::ReduceThenScan || plan.hierarchy.is_some() {
        return Err(Error::InvalidPlan(format!(
            "{} is not a flat reduce-then-scan plan",
            plan.label()
        )));
    }
    let mut run = Run::start(plan, xs.len(), env)?;
    if plan.workers == 1 {
        let ys = serial(&mut run, op, xs);
        return Ok((ys, run.finish(env)));
    }
    let ranges = run.segments.ranges().to_vec();
    let totals = ranges
        .iter()
        .enumerate()
        .map(|(w, r)| run.reduce(op, xs, w, r.clone()))
        .collect();
    run.tl.barrier_all();

    run.tl.set_phase(Phase::Global);
    let circuit = build(plan.global, plan.workers)?;
    let inclusive = run.circuit(op, &circuit, totals, |s| s, true)?;
    run.tl.barrier_all();

    let ys = run.rescan(op, xs, &inclusive, &ranges, 1);
    Ok((ys, run.finish(env)))
}

/// Reduce-then-scan over `ranks × lanes` workers with static lane segments:
/// lane reductions, a scan over the lane totals of each rank, a global scan
/// over ranks carried out by all lanes of a rank in parallel, then lane
/// rescans.
pub fn hierarchical_scan<O: ScanOp>(
    op: &O,
    xs: &[O::Value],
    plan: &StrategyPlan,
    env: &SimEnv,
) -> Result<(Vec<O::Value>, Trace)> {
    if plan.hierarchy.is_none() || plan.dynamic {
        return Err(Error::InvalidPlan(format!(
            "{} is not a static hierarchical plan",
            plan.label()
        )));
    }
    let mut run = Run::start(plan, xs.len(), env)?;
    if plan.workers == 1 {
        let ys = serial(&mut run, op, xs);
        return Ok((ys, run.finish(env)));
    }
    let ranges = run.segments.ranges().to_vec();
    let totals = ranges
        .iter()
        .enumerate()
        .map(|(w, r)| run.reduce(op, xs, w, r.clone()))
        .collect();
    run.tl.barrier_all();
    let ys = hierarchical_tail(&mut run, op, xs, plan, &ranges, totals)?;
    Ok((ys, run.finish(env)))
}

/// Everything after the first phase of a hierarchical scan, given the lane
/// segments and their totals.
pub(crate) fn hierarchical_tail<O: ScanOp>(
    run: &mut Run,
    op: &O,
    xs: &[O::Value],
    plan: &StrategyPlan,
    ranges: &[Range<usize>],
    totals: Vec<O::Value>,
) -> Result<Vec<O::Value>> {
    let (ranks, lanes) = (plan.ranks(), plan.lanes());
    let mut inclusive = totals;

    if lanes > 1 {
        run.tl.set_phase(Phase::LaneScan);
        let circuit = build(plan.local_kind(), lanes)?;
        let mut scanned = Vec::with_capacity(inclusive.len());
        for r in 0..ranks {
            let values = inclusive[r * lanes..(r + 1) * lanes].to_vec();
            scanned.extend(run.circuit(op, &circuit, values, |s| r * lanes + s, false)?);
        }
        inclusive = scanned;
        run.tl.barrier_all();
    }

    if ranks > 1 {
        run.tl.set_phase(Phase::Global);
        let circuit = build(plan.global, ranks)?;
        if !circuit.is_prefix_form() || circuit.slots() != ranks {
            return Err(Error::UnsupportedCircuit {
                kind: plan.global,
                context: "global scan over ranks",
            });
        }
        let last = |r: usize| r * lanes + lanes - 1;
        for stage in circuit.stages() {
            let snapshot: Vec<O::Value> = (0..ranks).map(|r| inclusive[last(r)].clone()).collect();
            let messages: Vec<_> = stage
                .iter()
                .map(|g| run.tl.send(last(g.src().expect("prefix-form gate")), last(g.dst())))
                .collect();
            for (g, msg) in stage.iter().zip(messages) {
                let (src, dst) = (g.src().expect("prefix-form gate"), g.dst());
                run.tl.recv(last(dst), msg);
                for j in 0..lanes - 1 {
                    let hand_off = run.tl.share(last(dst), dst * lanes + j);
                    run.tl.recv(dst * lanes + j, hand_off);
                }
                for j in 0..lanes {
                    let w = dst * lanes + j;
                    run.tl.combine(w, run.aux[w].sample(), Some(src), Some(dst));
                    inclusive[w] = op.combine(&snapshot[src], &inclusive[w]);
                }
            }
            run.tl.barrier_all();
        }
    }

    Ok(run.rescan(op, xs, &inclusive, ranges, lanes))
}

/// Runs any plan on the simulator.
pub fn run_plan<O: ScanOp>(
    op: &O,
    xs: &[O::Value],
    plan: &StrategyPlan,
    env: &SimEnv,
) -> Result<(Vec<O::Value>, Trace)> {
    match (plan.hierarchy, plan.dynamic, plan.strategy) {
        (Some(_), true, _) => crate::stealing::dynamic_hierarchical_scan(op, xs, plan, env),
        (Some(_), false, _) => hierarchical_scan(op, xs, plan, env),
        (None, _, Strategy::ScanThenMap) => scan_then_map(op, xs, plan, env),
        (None, _, Strategy::ReduceThenScan) => reduce_then_scan(op, xs, plan, env),
    }
}
