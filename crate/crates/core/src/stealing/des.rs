use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::ops::Range;

use super::gap::{Gap, Side};
use super::lane::{choose_direction, Direction, LaneState, Neighbor, RateEstimate, StartPolicy};
use crate::distributed::{hierarchical_tail, partition, Run, StrategyPlan};
use crate::operators::{CostTable, ScanOp};
use crate::sim::{Backend, SimEnv, Timeline, Trace};
use crate::{Error, Nanos, Result};

/// Final state of one lane after the first phase.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneOutcome<V> {
    pub lane: usize,
    /// Elements folded into `value`, contiguous.
    pub range: Range<usize>,
    pub value: V,
    /// Combines performed.
    pub ops: u64,
    pub busy: Nanos,
    /// Time the lane finished its part of the phase.
    pub finish: Nanos,
    /// Elements taken from outside the lane's static segment.
    pub stolen: u64,
}

/// Latest finish among `outcomes`.
pub fn reduce_makespan<V>(outcomes: &[LaneOutcome<V>]) -> Nanos {
    outcomes.iter().map(|o| o.finish).max().unwrap_or(0)
}

/// Gaps around each lane's start element: gap `i` lies between lanes
/// `i − 1` and `i`; gaps 0 and `T` border the segment ends.
pub(crate) fn initial_gaps(statics: &[Range<usize>]) -> (Vec<usize>, Vec<Gap>) {
    let t = statics.len();
    let starts: Vec<usize> = statics
        .iter()
        .enumerate()
        .map(|(i, r)| StartPolicy::for_lane(i, t).start(r))
        .collect();
    let (begin, end) = (statics[0].start, statics[t - 1].end);
    let gaps = (0..=t)
        .map(|g| {
            let lo = if g == 0 { begin } else { starts[g - 1] + 1 };
            let hi = if g == t { end } else { starts[g] };
            Gap::new(lo, hi)
        })
        .collect();
    (starts, gaps)
}

/// Lane `lane`'s static segment within a segment split over `lanes`.
fn static_split(segment: Range<usize>, lanes: usize) -> Result<Vec<Range<usize>>> {
    if lanes == 0 || segment.len() < lanes {
        return Err(Error::TooFewElements {
            n: segment.len(),
            workers: lanes,
        });
    }
    let base = segment.start;
    Ok(partition(segment.len(), lanes)?
        .ranges()
        .iter()
        .map(|r| r.start + base..r.end + base)
        .collect())
}

fn check_inputs(xs: usize, costs: &CostTable, segment: &Range<usize>) -> Result<()> {
    for len in [xs, costs.len()] {
        if len < segment.end {
            return Err(Error::LengthMismatch {
                expected: segment.end,
                actual: len,
            });
        }
    }
    Ok(())
}

/// Simulates the stealing reduction of one rank whose lanes own the static
/// segments `statics`, lane `i` running as worker `first_worker + i`.
///
/// Events are processed in `(time, lane, sequence)` order, so lanes acting
/// at the same instant are served lowest index first.
pub(crate) fn steal_on<O: ScanOp>(
    tl: &mut Timeline,
    first_worker: usize,
    op: &O,
    xs: &[O::Value],
    statics: &[Range<usize>],
    costs: &CostTable,
    window: usize,
) -> Vec<LaneOutcome<O::Value>> {
    let t = statics.len();
    let prior = costs.model().mean();
    let (starts, gaps) = initial_gaps(statics);
    let mut lanes: Vec<LaneState<O::Value>> = (0..t)
        .map(|i| LaneState::new(i, starts[i], xs[starts[i]].clone(), StartPolicy::for_lane(i, t)))
        .collect();
    let mut rates: Vec<RateEstimate> = (0..t).map(|_| RateEstimate::new(window, prior)).collect();
    let mut pending: Vec<Option<Nanos>> = vec![None; t];
    let mut finish = vec![0; t];
    let mut stolen = vec![0u64; t];

    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    for i in 0..t {
        queue.push(Reverse((tl.clock(first_worker + i), i, seq)));
        seq += 1;
    }
    while let Some(Reverse((now, i, _))) = queue.pop() {
        if let Some(cost) = pending[i].take() {
            rates[i].record(cost);
            lanes[i].ops_done += 1;
            lanes[i].elapsed += cost;
        }
        let left = Neighbor {
            remaining: gaps[i].remaining(),
            rate: if i > 0 { rates[i - 1].rate() } else { prior },
        };
        let right = Neighbor {
            remaining: gaps[i + 1].remaining(),
            rate: if i + 1 < t { rates[i + 1].rate() } else { prior },
        };
        let direction = choose_direction(&lanes[i], left, right);
        let index = match direction {
            Direction::Done => {
                finish[i] = now;
                continue;
            }
            Direction::Left => gaps[i].claim(Side::FromRightLane),
            Direction::Right => gaps[i + 1].claim(Side::FromLeftLane),
        };
        let Some(index) = index else {
            // Single-threaded: a gap seen open cannot close before the claim.
            unreachable!("simulated claim on a closed gap");
        };
        let lane = &mut lanes[i];
        match direction {
            Direction::Left => {
                debug_assert_eq!(index + 1, lane.pl);
                lane.res = op.combine(&xs[index], &lane.res);
                lane.pl = index;
            }
            _ => {
                debug_assert_eq!(index, lane.pr + 1);
                lane.res = op.combine(&lane.res, &xs[index]);
                lane.pr = index;
            }
        }
        lane.last_move = Some(direction);
        if !statics[i].contains(&index) {
            stolen[i] += 1;
        }
        let cost = costs.element(index);
        tl.combine(first_worker + i, cost, Some(index), None);
        pending[i] = Some(cost);
        queue.push(Reverse((now + cost, i, seq)));
        seq += 1;
    }

    lanes
        .into_iter()
        .map(|l| LaneOutcome {
            lane: l.index,
            range: l.range(),
            ops: l.ops_done,
            busy: l.elapsed,
            finish: finish[l.index],
            stolen: stolen[l.index],
            value: l.res,
        })
        .collect()
}

/// Each lane folds its own static segment left to right.
pub(crate) fn static_on<O: ScanOp>(
    tl: &mut Timeline,
    first_worker: usize,
    op: &O,
    xs: &[O::Value],
    statics: &[Range<usize>],
    costs: &CostTable,
) -> Vec<LaneOutcome<O::Value>> {
    statics
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let w = first_worker + i;
            let mut value = xs[r.start].clone();
            let mut busy = 0;
            for j in r.start + 1..r.end {
                tl.combine(w, costs.element(j), Some(j), None);
                busy += costs.element(j);
                value = op.combine(&value, &xs[j]);
            }
            LaneOutcome {
                lane: i,
                range: r.clone(),
                value,
                ops: (r.len() - 1) as u64,
                busy,
                finish: tl.clock(w),
                stolen: 0,
            }
        })
        .collect()
}

/// Reduces `xs[segment]` with `lanes` lanes that steal from each other,
/// starting from the static split. Returns each lane's final range and fold.
pub fn steal_reduce<O: ScanOp>(
    op: &O,
    xs: &[O::Value],
    segment: Range<usize>,
    lanes: usize,
    costs: &CostTable,
    window: usize,
) -> Result<(Vec<LaneOutcome<O::Value>>, Trace)> {
    check_inputs(xs.len(), costs, &segment)?;
    if window == 0 {
        return Err(Error::InvalidConfig("rate window must be at least 1".into()));
    }
    let statics = static_split(segment, lanes)?;
    let mut tl = Timeline::new(lanes, 0);
    let outcomes = steal_on(&mut tl, 0, op, xs, &statics, costs, window);
    Ok((
        outcomes,
        tl.into_trace(Backend::Sim, costs.model().mean().round() as u64),
    ))
}

/// The static counterpart of [`steal_reduce`] on the same costs.
pub fn static_reduce<O: ScanOp>(
    op: &O,
    xs: &[O::Value],
    segment: Range<usize>,
    lanes: usize,
    costs: &CostTable,
) -> Result<(Vec<LaneOutcome<O::Value>>, Trace)> {
    check_inputs(xs.len(), costs, &segment)?;
    let statics = static_split(segment, lanes)?;
    let mut tl = Timeline::new(lanes, 0);
    let outcomes = static_on(&mut tl, 0, op, xs, &statics, costs);
    Ok((
        outcomes,
        tl.into_trace(Backend::Sim, costs.model().mean().round() as u64),
    ))
}

/// Hierarchical reduce-then-scan whose first phase balances work between
/// neighbouring lanes of a rank. Rank boundaries stay fixed; only lane
/// boundaries move. The remaining phases run as in the static scheme on the
/// resulting lane ranges.
pub fn dynamic_hierarchical_scan<O: ScanOp>(
    op: &O,
    xs: &[O::Value],
    plan: &StrategyPlan,
    env: &SimEnv,
) -> Result<(Vec<O::Value>, Trace)> {
    let Some(h) = plan.hierarchy else {
        return Err(Error::InvalidPlan(format!(
            "{} has no ranks x lanes hierarchy",
            plan.label()
        )));
    };
    if env.rate_window == 0 {
        return Err(Error::InvalidConfig("rate window must be at least 1".into()));
    }
    let mut run = Run::start(plan, xs.len(), env)?;
    if plan.workers == 1 {
        let mut ys = xs.to_vec();
        run.scan(op, xs, &mut ys, 0, 0..xs.len(), None);
        return Ok((ys, run.finish(env)));
    }
    let statics = run.segments.ranges().to_vec();
    let mut ranges = Vec::with_capacity(plan.workers);
    let mut totals = Vec::with_capacity(plan.workers);
    for r in 0..h.ranks {
        let lanes = &statics[r * h.lanes..(r + 1) * h.lanes];
        for o in steal_on(&mut run.tl, r * h.lanes, op, xs, lanes, &run.costs, env.rate_window) {
            ranges.push(o.range);
            totals.push(o.value);
        }
    }
    run.tl.barrier_all();
    let ys = hierarchical_tail(&mut run, op, xs, plan, &ranges, totals)?;
    Ok((ys, run.finish(env)))
}
