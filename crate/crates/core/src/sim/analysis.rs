use serde::Serialize;

use super::trace::{EventKind, Phase, Trace};

/// Longest dependency chain through the trace, counted in `combine` events.
///
/// An event depends on the previous event of its worker and on its explicit
/// dependencies (message sends, barrier arrivals).
pub fn critical_path(trace: &Trace) -> u64 {
    let mut chain = vec![0u64; trace.events.len()];
    let mut last = vec![None::<usize>; trace.workers];
    let mut longest = 0;
    for (i, e) in trace.events.iter().enumerate() {
        let mut before = last[e.worker].map_or(0, |j| chain[j]);
        for &d in &e.deps {
            debug_assert!(d < i, "dependency on a later event");
            before = before.max(chain[d]);
        }
        chain[i] = before + u64::from(e.kind == EventKind::Combine);
        last[e.worker] = Some(i);
        longest = longest.max(chain[i]);
    }
    longest
}

/// Operator applications per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WorkBreakdown {
    /// Preprocessing steps (not combines, excluded from `total`).
    pub preprocess: u64,
    pub local1: u64,
    /// Scan over lane totals inside each rank (hierarchical plans only).
    pub lane_scan: u64,
    pub global: u64,
    pub local2: u64,
    /// All combines.
    pub total: u64,
}

impl WorkBreakdown {
    /// `(local1, global, local2)` with the lane scan folded into the global
    /// phase.
    pub fn components(&self) -> (u64, u64, u64) {
        (self.local1, self.lane_scan + self.global, self.local2)
    }
}

pub fn work_account(trace: &Trace) -> WorkBreakdown {
    let mut w = WorkBreakdown::default();
    for e in &trace.events {
        match (e.kind, e.phase) {
            (EventKind::Map, _) => w.preprocess += 1,
            (EventKind::Combine, phase) => {
                w.total += 1;
                match phase {
                    Phase::Preprocess | Phase::Local1 => w.local1 += 1,
                    Phase::LaneScan => w.lane_scan += 1,
                    Phase::Global => w.global += 1,
                    Phase::Local2 => w.local2 += 1,
                }
            }
            _ => {}
        }
    }
    w
}
