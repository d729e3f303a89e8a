use std::collections::VecDeque;
use std::ops::Range;

use crate::Nanos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Left,
    Right,
    Done,
}

/// Where a lane starts inside its static segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StartPolicy {
    /// First lane of a rank: starts at the left end, only moves right.
    LeftToRight,
    /// Last lane of a rank: starts at the right end, only moves left.
    RightToLeft,
    /// Interior lanes: start at the (lower) middle element.
    MiddleOutward,
}

impl StartPolicy {
    pub fn for_lane(lane: usize, lanes: usize) -> Self {
        if lane == 0 {
            StartPolicy::LeftToRight
        } else if lane + 1 == lanes {
            StartPolicy::RightToLeft
        } else {
            StartPolicy::MiddleOutward
        }
    }

    /// First element processed within the static segment `range`.
    pub fn start(self, range: &Range<usize>) -> usize {
        match self {
            StartPolicy::LeftToRight => range.start,
            StartPolicy::RightToLeft => range.end - 1,
            StartPolicy::MiddleOutward => range.start + (range.len() - 1) / 2,
        }
    }
}

/// Processing rate a lane reports to its neighbours: the mean duration of
/// its most recent operations, or the cost model's mean before it has
/// finished any.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    window: usize,
    recent: VecDeque<Nanos>,
    prior: f64,
    ops_done: u64,
    elapsed: Nanos,
}

impl RateEstimate {
    /// # Panics
    ///
    /// If `window` is 0.
    pub fn new(window: usize, prior: f64) -> Self {
        assert!(window > 0, "rate window must hold at least one operation");
        Self {
            window,
            recent: VecDeque::with_capacity(window),
            prior,
            ops_done: 0,
            elapsed: 0,
        }
    }

    /// Records one completed operation.
    pub fn record(&mut self, duration: Nanos) {
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(duration);
        self.ops_done += 1;
        self.elapsed += duration;
    }

    /// Time per operation.
    pub fn rate(&self) -> f64 {
        if self.recent.is_empty() {
            self.prior
        } else {
            self.recent.iter().sum::<Nanos>() as f64 / self.recent.len() as f64
        }
    }

    pub fn ops_done(&self) -> u64 {
        self.ops_done
    }

    pub fn elapsed(&self) -> Nanos {
        self.elapsed
    }
}

/// What a lane knows about one adjacent gap and the neighbour across it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Unclaimed elements in the gap.
    pub remaining: usize,
    /// The neighbour's time per operation.
    pub rate: f64,
}

impl Neighbor {
    pub const CLOSED: Neighbor = Neighbor {
        remaining: 0,
        rate: 0.0,
    };
}

/// One lane of a rank during the stealing reduction. Lanes are numbered
/// from 0.
#[derive(Debug, Clone)]
pub struct LaneState<V> {
    pub index: usize,
    /// Leftmost processed element.
    pub pl: usize,
    /// Rightmost processed element.
    pub pr: usize,
    /// Fold of `xs[pl..=pr]` in index order.
    pub res: V,
    pub ops_done: u64,
    pub elapsed: Nanos,
    pub policy: StartPolicy,
    pub last_move: Option<Direction>,
}

impl<V> LaneState<V> {
    pub fn new(index: usize, start: usize, value: V, policy: StartPolicy) -> Self {
        Self {
            index,
            pl: start,
            pr: start,
            res: value,
            ops_done: 0,
            elapsed: 0,
            policy,
            last_move: None,
        }
    }

    pub fn range(&self) -> Range<usize> {
        self.pl..self.pr + 1
    }
}

/// Greedy direction choice.
///
/// With both gaps open a lane helps the slower neighbour: it moves left
/// when the left neighbour takes longer per operation. Its first move is to
/// the right; on later equal rates it alternates, turning away from its
/// previous move. With one gap open it takes that one; with none it is done.
pub fn choose_direction<V>(state: &LaneState<V>, left: Neighbor, right: Neighbor) -> Direction {
    match (left.remaining > 0, right.remaining > 0) {
        (false, false) => Direction::Done,
        (true, false) => Direction::Left,
        (false, true) => Direction::Right,
        (true, true) => {
            if state.last_move.is_none() {
                Direction::Right
            } else if left.rate > right.rate {
                Direction::Left
            } else if left.rate < right.rate {
                Direction::Right
            } else {
                match state.last_move {
                    Some(Direction::Right) => Direction::Left,
                    _ => Direction::Right,
                }
            }
        }
    }
}
