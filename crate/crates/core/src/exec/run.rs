use std::hint::black_box;
use std::ops::Range;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread::{self, ScopedJoinHandle};
use std::time::{Duration, Instant};

use super::{ExecConfig, Workload};
use crate::circuits::{build, Gate};
use crate::distributed::SegmentAssignment;
use crate::operators::{check_against_oracle, CostStream, CostTable, ScanOp};
use crate::sim::{Backend, Event, EventKind, Phase, Trace};
use crate::stealing::{
    choose_direction, initial_gaps, Direction, Gap, LaneState, Neighbor, RateEstimate, Side, StartPolicy,
};
use crate::{Error, Nanos, Result};

/// Per-worker measurements of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaneStats {
    pub worker: usize,
    /// Elements folded in the first phase, the start element included.
    pub range: Range<usize>,
    /// Combines in the first phase.
    pub ops: u64,
    /// First-phase elements taken from outside the static segment.
    pub stolen: u64,
    /// Time spent in operator applications, all phases.
    pub busy: Duration,
    pub idle: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stats {
    pub wall: Duration,
    pub lanes: Vec<LaneStats>,
    pub steals: u64,
    /// Wall-clock events, in the simulator's trace format.
    pub trace: Trace,
}

/// State visible to every worker thread.
struct Ctx<'a, O: ScanOp> {
    op: &'a O,
    xs: &'a [O::Value],
    costs: &'a CostTable,
    workload: Workload,
    epoch: Instant,
    deadline: Instant,
    limit: Duration,
    abort: AtomicBool,
    cores: Vec<core_affinity::CoreId>,
}

/// Events of one worker thread.
struct Recorder {
    worker: usize,
    phase: Phase,
    events: Vec<Event>,
}

impl Recorder {
    fn new(worker: usize, phase: Phase) -> Self {
        Self {
            worker,
            phase,
            events: Vec::new(),
        }
    }

    fn push(&mut self, kind: EventKind, start: Nanos, end: Nanos, src: Option<usize>, dst: Option<usize>) {
        self.events.push(Event {
            worker: self.worker,
            kind,
            start,
            end,
            phase: self.phase,
            src,
            dst,
            deps: Vec::new(),
        });
    }
}

impl<O: ScanOp> Ctx<'_, O> {
    fn now(&self) -> Nanos {
        self.epoch.elapsed().as_nanos() as Nanos
    }

    fn check(&self) -> Result<()> {
        if self.abort.load(Ordering::Relaxed) {
            return Err(Error::Watchdog(self.limit));
        }
        if Instant::now() > self.deadline {
            self.abort.store(true, Ordering::Relaxed);
            return Err(Error::Watchdog(self.limit));
        }
        Ok(())
    }

    fn enter(&self, worker: usize) {
        if !self.cores.is_empty() {
            // Best effort: failing to pin leaves scheduling to the OS.
            let _ = core_affinity::set_for_current(self.cores[worker % self.cores.len()]);
        }
    }

    /// `left ⊙ right`, followed by busy work until `cost` has elapsed.
    fn combine(
        &self,
        rec: &mut Recorder,
        cost: Nanos,
        left: &O::Value,
        right: &O::Value,
        src: Option<usize>,
        dst: Option<usize>,
    ) -> Result<O::Value> {
        let start = self.now();
        let began = Instant::now();
        let value = self.op.combine(left, right);
        let target = Duration::from_nanos(cost);
        while began.elapsed() < target {
            self.check()?;
            match self.workload {
                Workload::Spin => thread::yield_now(),
                Workload::Compose => {
                    black_box(self.op.combine(black_box(left), black_box(right)));
                }
            }
        }
        rec.push(EventKind::Combine, start, self.now(), src, dst);
        Ok(value)
    }

    fn receive<T>(&self, rec: &mut Recorder, rx: &Receiver<T>, from: usize) -> Result<T> {
        let start = self.now();
        loop {
            match rx.recv_timeout(Duration::from_millis(5)) {
                Ok(v) => {
                    rec.push(EventKind::Recv, start, self.now(), Some(from), Some(rec.worker));
                    return Ok(v);
                }
                Err(RecvTimeoutError::Timeout) => self.check()?,
                Err(RecvTimeoutError::Disconnected) => {
                    self.check()?;
                    return Err(Error::WorkerPanic(format!("worker {} lost its sender", rec.worker)));
                }
            }
        }
    }
}

fn join_all<'scope, T>(handles: Vec<ScopedJoinHandle<'scope, Result<T>>>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(handles.len());
    let mut first_err = None;
    for h in handles {
        match h.join() {
            Ok(Ok(v)) => out.push(v),
            Ok(Err(e)) => {
                first_err.get_or_insert(e);
            }
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "worker panicked".into());
                first_err.get_or_insert(Error::WorkerPanic(msg));
            }
        }
    }
    match first_err {
        // Prefer the watchdog over errors it caused elsewhere.
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// What a worker produced in the first phase.
struct FirstPhase<V> {
    range: Range<usize>,
    value: V,
    ops: u64,
    stolen: u64,
    events: Vec<Event>,
}

fn static_lane<O: ScanOp>(ctx: &Ctx<'_, O>, worker: usize, range: Range<usize>) -> Result<FirstPhase<O::Value>> {
    ctx.enter(worker);
    let mut rec = Recorder::new(worker, Phase::Local1);
    let mut acc = ctx.xs[range.start].clone();
    for i in range.start + 1..range.end {
        acc = ctx.combine(&mut rec, ctx.costs.element(i), &acc, &ctx.xs[i], Some(i), None)?;
    }
    Ok(FirstPhase {
        ops: (range.len() - 1) as u64,
        range,
        value: acc,
        stolen: 0,
        events: rec.events,
    })
}

/// Gaps and published rates of one rank's lanes.
struct RankShared {
    starts: Vec<usize>,
    gaps: Vec<Gap>,
    rates: Vec<AtomicU64>,
}

fn stealing_lane<O: ScanOp>(
    ctx: &Ctx<'_, O>,
    rank: &RankShared,
    worker: usize,
    lane: usize,
    statics: &Range<usize>,
    window: usize,
) -> Result<FirstPhase<O::Value>> {
    ctx.enter(worker);
    let lanes = rank.starts.len();
    let prior = ctx.costs.model().mean();
    let start = rank.starts[lane];
    let mut rec = Recorder::new(worker, Phase::Local1);
    let mut state = LaneState::new(lane, start, ctx.xs[start].clone(), StartPolicy::for_lane(lane, lanes));
    let mut rate = RateEstimate::new(window, prior);
    let mut stolen = 0;
    let rate_of = |i: usize| f64::from_bits(rank.rates[i].load(Ordering::Relaxed));
    loop {
        ctx.check()?;
        let left = Neighbor {
            remaining: rank.gaps[lane].remaining(),
            rate: if lane > 0 { rate_of(lane - 1) } else { prior },
        };
        let right = Neighbor {
            remaining: rank.gaps[lane + 1].remaining(),
            rate: if lane + 1 < lanes { rate_of(lane + 1) } else { prior },
        };
        let direction = choose_direction(&state, left, right);
        let claimed = match direction {
            Direction::Done => break,
            Direction::Left => rank.gaps[lane].claim(Side::FromRightLane),
            Direction::Right => rank.gaps[lane + 1].claim(Side::FromLeftLane),
        };
        // Lost the race for the last element of a gap: decide again.
        let Some(i) = claimed else { continue };
        let cost = ctx.costs.element(i);
        let began = Instant::now();
        if direction == Direction::Left {
            if i + 1 != state.pl {
                return Err(Error::InvalidPlan(format!(
                    "lane {lane} claimed {i} left of {}",
                    state.pl
                )));
            }
            state.res = ctx.combine(&mut rec, cost, &ctx.xs[i], &state.res, Some(i), None)?;
            state.pl = i;
        } else {
            if i != state.pr + 1 {
                return Err(Error::InvalidPlan(format!(
                    "lane {lane} claimed {i} right of {}",
                    state.pr
                )));
            }
            state.res = ctx.combine(&mut rec, cost, &state.res, &ctx.xs[i], Some(i), None)?;
            state.pr = i;
        }
        state.last_move = Some(direction);
        state.ops_done += 1;
        let took = began.elapsed().as_nanos() as Nanos;
        state.elapsed += took;
        rate.record(took);
        rank.rates[lane].store(rate.rate().to_bits(), Ordering::Relaxed);
        if !statics.contains(&i) {
            stolen += 1;
        }
    }
    Ok(FirstPhase {
        range: state.range(),
        ops: state.ops_done,
        stolen,
        value: state.res,
        events: rec.events,
    })
}

/// Runs the hierarchical scan described by `config` on real threads and
/// checks the result against the sequential oracle.
pub fn run<O: ScanOp>(op: &O, xs: &[O::Value], config: &ExecConfig) -> Result<(Vec<O::Value>, Stats)> {
    let n = xs.len();
    config.validate(n)?;
    let plan = config.plan();
    let segments = SegmentAssignment::hierarchical(n, config.ranks, config.lanes)?;
    let costs = CostTable::generate(&config.cost, &segments.lengths());
    let (ranks, lanes, workers) = (config.ranks, config.lanes, config.workers());
    let limit = config.watchdog.unwrap_or_else(|| {
        let total: Nanos = costs.elements().iter().sum();
        Duration::from_nanos(total.saturating_mul(4)) + Duration::from_secs(10)
    });
    let ctx = Ctx {
        op,
        xs,
        costs: &costs,
        workload: config.workload,
        epoch: Instant::now(),
        deadline: Instant::now() + limit,
        limit,
        abort: AtomicBool::new(false),
        cores: if config.pin {
            core_affinity::get_core_ids().unwrap_or_default()
        } else {
            Vec::new()
        },
    };
    let mut aux = costs.aux_streams(workers);
    let mut events: Vec<Event> = Vec::new();

    // Phase 1: lane reductions, static or stealing.
    let statics = segments.ranges().to_vec();
    let first: Vec<FirstPhase<O::Value>> = if workers == 1 {
        Vec::new()
    } else if config.dynamic {
        let shared: Vec<RankShared> = (0..ranks)
            .map(|r| {
                let (starts, gaps) = initial_gaps(&statics[r * lanes..(r + 1) * lanes]);
                let prior = costs.model().mean().to_bits();
                RankShared {
                    starts,
                    gaps,
                    rates: (0..lanes).map(|_| AtomicU64::new(prior)).collect(),
                }
            })
            .collect();
        let (ctx, shared, statics) = (&ctx, &shared, &statics);
        thread::scope(|s| {
            let handles = (0..workers)
                .map(|w| {
                    s.spawn(move || {
                        stealing_lane(ctx, &shared[w / lanes], w, w % lanes, &statics[w], config.rate_window)
                    })
                })
                .collect();
            join_all(handles)
        })?
    } else {
        let ctx = &ctx;
        thread::scope(|s| {
            let handles = statics
                .iter()
                .enumerate()
                .map(|(w, r)| {
                    let r = r.clone();
                    s.spawn(move || static_lane(ctx, w, r))
                })
                .collect();
            join_all(handles)
        })?
    };

    let ys = if workers == 1 {
        serial(&ctx, &mut events)?
    } else {
        let mut ranges = Vec::with_capacity(workers);
        let mut inclusive = Vec::with_capacity(workers);
        for f in &first {
            ranges.push(f.range.clone());
            inclusive.push(f.value.clone());
            events.extend(f.events.iter().cloned());
        }

        if lanes > 1 {
            let circuit = build(plan.local_kind(), lanes)?;
            let mut scanned = Vec::with_capacity(workers);
            for r in 0..ranks {
                let values = inclusive[r * lanes..(r + 1) * lanes].to_vec();
                let (out, evs) = lane_circuit(&ctx, &circuit, values, r * lanes, &mut aux[r * lanes..(r + 1) * lanes])?;
                scanned.extend(out);
                events.extend(evs);
            }
            inclusive = scanned;
        }

        if ranks > 1 {
            let circuit = build(plan.global, ranks)?;
            for stage in circuit.stages() {
                events.extend(global_stage(&ctx, stage, &mut inclusive, &mut aux, lanes)?);
            }
        }

        rescan(&ctx, &ranges, &inclusive, lanes, &mut events)?
    };
    let wall = ctx.epoch.elapsed();
    check_against_oracle(op, xs, &ys)?;

    let mut busy = vec![0; workers];
    for e in &events {
        if e.kind == EventKind::Combine {
            busy[e.worker] += e.end - e.start;
        }
    }
    let lane_stats: Vec<LaneStats> = (0..workers)
        .map(|w| {
            let (range, ops, stolen) = match first.get(w) {
                Some(f) => (f.range.clone(), f.ops, f.stolen),
                None => (0..n, (n - 1) as u64, 0),
            };
            let busy = Duration::from_nanos(busy[w]);
            LaneStats {
                worker: w,
                range,
                ops,
                stolen,
                busy,
                idle: wall.saturating_sub(busy),
            }
        })
        .collect();
    events.sort_by_key(|e| (e.start, e.worker));
    let stats = Stats {
        wall,
        steals: lane_stats.iter().map(|l| l.stolen).sum(),
        lanes: lane_stats,
        trace: Trace {
            backend: Backend::Exec,
            workers,
            events,
            mean_cost: config.cost.mean().round() as u64,
        },
    };
    Ok((ys, stats))
}

fn serial<O: ScanOp>(ctx: &Ctx<'_, O>, events: &mut Vec<Event>) -> Result<Vec<O::Value>> {
    let xs = ctx.xs;
    thread::scope(|s| {
        let h = s.spawn(|| {
            ctx.enter(0);
            let mut rec = Recorder::new(0, Phase::Local1);
            let mut ys = Vec::with_capacity(xs.len());
            ys.push(xs[0].clone());
            for i in 1..xs.len() {
                let v = ctx.combine(&mut rec, ctx.costs.element(i), &ys[i - 1], &xs[i], Some(i), Some(i))?;
                ys.push(v);
            }
            Ok((ys, rec.events))
        });
        let (ys, evs) = join_all(vec![h])?.pop().expect("one worker");
        events.extend(evs);
        Ok(ys)
    })
}

/// Runs a circuit over the lanes of one rank, one thread per lane and
/// stage. Lanes read each other's values through shared memory.
fn lane_circuit<O: ScanOp>(
    ctx: &Ctx<'_, O>,
    circuit: &crate::circuits::Circuit,
    values: Vec<O::Value>,
    first_worker: usize,
    aux: &mut [CostStream],
) -> Result<(Vec<O::Value>, Vec<Event>)> {
    let mut slots: Vec<Option<O::Value>> = values.into_iter().map(Some).collect();
    slots.resize(circuit.slots(), None);
    let mut events = Vec::new();
    for stage in circuit.stages() {
        let snapshot = &slots;
        let writes = thread::scope(|s| {
            let handles: Vec<_> = aux
                .iter_mut()
                .enumerate()
                .filter(|(lane, _)| stage.iter().any(|g| circuit.home(g.dst()) == *lane))
                .map(|(lane, stream)| {
                    s.spawn(move || -> Result<_> {
                        let w = first_worker + lane;
                        ctx.enter(w);
                        let mut rec = Recorder::new(w, Phase::LaneScan);
                        let mut writes = Vec::new();
                        let read = |slot: usize| {
                            snapshot[slot]
                                .as_ref()
                                .ok_or_else(|| Error::InvalidPlan(format!("slot {slot} read before it was written")))
                        };
                        for g in stage.iter().filter(|g| circuit.home(g.dst()) == lane) {
                            let v = match *g {
                                Gate::Prepend { src, dst } => ctx.combine(
                                    &mut rec,
                                    stream.sample(),
                                    read(src)?,
                                    read(dst)?,
                                    Some(src),
                                    Some(dst),
                                )?,
                                Gate::Append { src, dst } => ctx.combine(
                                    &mut rec,
                                    stream.sample(),
                                    read(dst)?,
                                    read(src)?,
                                    Some(src),
                                    Some(dst),
                                )?,
                                Gate::Copy { src, .. } => read(src)?.clone(),
                                Gate::Identity { .. } => {
                                    ctx.op.identity().ok_or(Error::MissingIdentity("identity gates"))?
                                }
                            };
                            writes.push((g.dst(), v));
                        }
                        Ok((writes, rec.events))
                    })
                })
                .collect();
            join_all(handles)
        })?;
        for (w, evs) in writes {
            for (dst, v) in w {
                slots[dst] = Some(v);
            }
            events.extend(evs);
        }
    }
    let out = slots
        .into_iter()
        .take(circuit.n())
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::InvalidPlan(format!("output slot {i} never written"))))
        .collect::<Result<_>>()?;
    Ok((out, events))
}

/// One round of the global scan over ranks. Each rank thread sends its
/// total to the ranks that read it, receives the total it prepends, and
/// applies it to all of its lanes in parallel.
fn global_stage<O: ScanOp>(
    ctx: &Ctx<'_, O>,
    stage: &[Gate],
    inclusive: &mut [O::Value],
    aux: &mut [CostStream],
    lanes: usize,
) -> Result<Vec<Event>> {
    let ranks = inclusive.len() / lanes;
    let (txs, rxs): (Vec<_>, Vec<_>) = (0..ranks).map(|_| mpsc::channel::<(usize, O::Value)>()).unzip();
    let txs = &txs;
    let per_rank = thread::scope(|s| {
        let handles: Vec<_> = inclusive
            .chunks_mut(lanes)
            .zip(aux.chunks_mut(lanes))
            .zip(rxs)
            .enumerate()
            .map(|(r, ((values, streams), rx))| {
                s.spawn(move || -> Result<Vec<Event>> {
                    let last = r * lanes + lanes - 1;
                    ctx.enter(last);
                    let mut rec = Recorder::new(last, Phase::Global);
                    for g in stage.iter().filter(|g| g.src() == Some(r)) {
                        let now = ctx.now();
                        txs[g.dst()]
                            .send((r, values[lanes - 1].clone()))
                            .map_err(|_| Error::WorkerPanic(format!("rank {} hung up", g.dst())))?;
                        rec.push(EventKind::Send, now, now, Some(last), Some(g.dst() * lanes + lanes - 1));
                    }
                    let mut events = Vec::new();
                    for g in stage.iter().filter(|g| g.dst() == r) {
                        let Gate::Prepend { src, dst } = *g else {
                            return Err(Error::InvalidPlan("global gates over ranks must prepend".into()));
                        };
                        let (from, prefix) = ctx.receive(&mut rec, &rx, src * lanes + lanes - 1)?;
                        debug_assert_eq!(from, src);
                        let prefix = &prefix;
                        let updated = thread::scope(|s| {
                            let handles = values
                                .iter()
                                .zip(streams.iter_mut())
                                .enumerate()
                                .map(|(j, (v, stream))| {
                                    s.spawn(move || -> Result<_> {
                                        let w = r * lanes + j;
                                        ctx.enter(w);
                                        let mut rec = Recorder::new(w, Phase::Global);
                                        let v =
                                            ctx.combine(&mut rec, stream.sample(), prefix, v, Some(src), Some(dst))?;
                                        Ok((v, rec.events))
                                    })
                                })
                                .collect();
                            join_all(handles)
                        })?;
                        for (slot, (v, evs)) in values.iter_mut().zip(updated) {
                            *slot = v;
                            events.extend(evs);
                        }
                    }
                    events.extend(rec.events);
                    Ok(events)
                })
            })
            .collect();
        join_all(handles)
    })?;
    Ok(per_rank.into_iter().flatten().collect())
}

/// Last phase: every lane rescans its range from the inclusive prefix of the
/// lane before it, which crosses a rank boundary by message.
fn rescan<O: ScanOp>(
    ctx: &Ctx<'_, O>,
    ranges: &[Range<usize>],
    inclusive: &[O::Value],
    lanes: usize,
    events: &mut Vec<Event>,
) -> Result<Vec<O::Value>> {
    let workers = ranges.len();
    let ranks = workers / lanes;
    let mut ys = ctx.xs.to_vec();
    let mut chunks: Vec<&mut [O::Value]> = Vec::with_capacity(workers);
    let mut rest = ys.as_mut_slice();
    for r in ranges {
        let (head, tail) = rest.split_at_mut(r.len());
        chunks.push(head);
        rest = tail;
    }
    // Channel from the last lane of rank r − 1 into lane 0 of rank r.
    let (mut txs, mut rxs): (Vec<_>, Vec<_>) = (0..ranks)
        .map(|_| {
            let (tx, rx) = mpsc::channel::<O::Value>();
            (Some(tx), Some(rx))
        })
        .unzip();
    let identity = ctx.op.identity();
    let identity = &identity;
    let per_worker = thread::scope(|s| {
        let handles: Vec<_> = chunks
            .into_iter()
            .enumerate()
            .map(|(w, out)| {
                let (rank, lane) = (w / lanes, w % lanes);
                let to_next = (lane + 1 == lanes && rank + 1 < ranks)
                    .then(|| txs[rank + 1].take())
                    .flatten();
                let from_prev = (lane == 0 && rank > 0).then(|| rxs[rank].take()).flatten();
                let range = ranges[w].clone();
                s.spawn(move || -> Result<Vec<Event>> {
                    ctx.enter(w);
                    let mut rec = Recorder::new(w, Phase::Local2);
                    if let Some(tx) = to_next {
                        let now = ctx.now();
                        tx.send(inclusive[w].clone())
                            .map_err(|_| Error::WorkerPanic(format!("worker {} hung up", w + 1)))?;
                        rec.push(EventKind::Send, now, now, Some(w), Some(w + 1));
                    }
                    let received;
                    let prefix = match from_prev {
                        Some(rx) => {
                            received = ctx.receive(&mut rec, &rx, w - 1)?;
                            Some(&received)
                        }
                        None if w == 0 => identity.as_ref(),
                        None => Some(&inclusive[w - 1]),
                    };
                    let xs = &ctx.xs[range.clone()];
                    let l = range.start;
                    out[0] = match prefix {
                        Some(p) => ctx.combine(&mut rec, ctx.costs.element(l), p, &xs[0], Some(l), Some(l))?,
                        None => xs[0].clone(),
                    };
                    for k in 1..xs.len() {
                        let i = l + k;
                        out[k] = ctx.combine(&mut rec, ctx.costs.element(i), &out[k - 1], &xs[k], Some(i), Some(i))?;
                    }
                    Ok(rec.events)
                })
            })
            .collect();
        join_all(handles)
    })?;
    events.extend(per_worker.into_iter().flatten());
    Ok(ys)
}
