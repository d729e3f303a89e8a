use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::partition::{partition, SegmentAssignment};
use crate::circuits::CircuitKind;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Local scans, global scan over totals, then map the prefixes in.
    ScanThenMap,
    /// Local reductions, global scan over totals, then rescan each segment.
    ReduceThenScan,
}

impl Strategy {
    pub const ALL: [Strategy; 2] = [Strategy::ScanThenMap, Strategy::ReduceThenScan];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::ScanThenMap => "scan-then-map",
            Strategy::ReduceThenScan => "reduce-then-scan",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "scan-then-map" | "scan_then_map" | "stm" => Ok(Strategy::ScanThenMap),
            "reduce-then-scan" | "reduce_then_scan" | "rts" => Ok(Strategy::ReduceThenScan),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy `{other}` (expected scan-then-map or reduce-then-scan)"
            ))),
        }
    }
}

/// `ranks` processes with `lanes` threads each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Hierarchy {
    pub ranks: usize,
    pub lanes: usize,
}

/// How a scan is distributed over workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct StrategyPlan {
    pub strategy: Strategy,
    /// Circuit over the segment totals (over ranks, for hierarchical plans).
    pub global: CircuitKind,
    /// Circuit over the lanes of one rank; defaults to `global`.
    pub local: Option<CircuitKind>,
    pub workers: usize,
    pub hierarchy: Option<Hierarchy>,
    /// Replace the static first phase with neighbour work stealing.
    pub dynamic: bool,
}

impl StrategyPlan {
    pub fn flat(strategy: Strategy, workers: usize, global: CircuitKind) -> Self {
        Self {
            strategy,
            global,
            local: None,
            workers,
            hierarchy: None,
            dynamic: false,
        }
    }

    /// Reduce-then-scan over `ranks × lanes` workers with static lane
    /// segments.
    pub fn hierarchical(ranks: usize, lanes: usize, global: CircuitKind) -> Self {
        Self {
            strategy: Strategy::ReduceThenScan,
            global,
            local: None,
            workers: ranks * lanes,
            hierarchy: Some(Hierarchy { ranks, lanes }),
            dynamic: false,
        }
    }

    /// Hierarchical plan whose lanes balance the first phase by stealing.
    pub fn dynamic(ranks: usize, lanes: usize, global: CircuitKind) -> Self {
        Self {
            dynamic: true,
            ..Self::hierarchical(ranks, lanes, global)
        }
    }

    pub fn with_local(mut self, local: CircuitKind) -> Self {
        self.local = Some(local);
        self
    }

    /// The same plan with static lane segments.
    pub fn to_static(mut self) -> Self {
        self.dynamic = false;
        self
    }

    pub fn local_kind(&self) -> CircuitKind {
        self.local.unwrap_or(self.global)
    }

    pub fn ranks(&self) -> usize {
        self.hierarchy.map_or(self.workers, |h| h.ranks)
    }

    pub fn lanes(&self) -> usize {
        self.hierarchy.map_or(1, |h| h.lanes)
    }

    /// Short label, e.g. `dynamic 4x12 dissemination`.
    pub fn label(&self) -> String {
        match self.hierarchy {
            None => format!("{} p={} {}", self.strategy, self.workers, self.global),
            Some(h) => format!(
                "{} {}x{} {}",
                if self.dynamic { "dynamic" } else { "hierarchical" },
                h.ranks,
                h.lanes,
                self.global
            ),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::InvalidPlan("at least one worker is required".into()));
        }
        if let Some(h) = self.hierarchy {
            if h.ranks == 0 || h.lanes == 0 || h.ranks * h.lanes != self.workers {
                return Err(Error::InvalidPlan(format!(
                    "{} ranks x {} lanes does not give {} workers",
                    h.ranks, h.lanes, self.workers
                )));
            }
            if self.strategy != Strategy::ReduceThenScan {
                return Err(Error::InvalidPlan("hierarchical plans use reduce-then-scan".into()));
            }
            if h.ranks > 1 && !self.global.is_prefix_form() {
                return Err(Error::UnsupportedCircuit {
                    kind: self.global,
                    context: "global scan over ranks",
                });
            }
        } else if self.dynamic {
            return Err(Error::InvalidPlan(
                "work stealing needs a ranks x lanes hierarchy".into(),
            ));
        }
        if n < self.workers {
            return Err(Error::TooFewElements {
                n,
                workers: self.workers,
            });
        }
        Ok(())
    }

    /// Static leaf segments, one per worker.
    pub fn assignment(&self, n: usize) -> Result<SegmentAssignment> {
        self.validate(n)?;
        match self.hierarchy {
            None => partition(n, self.workers),
            Some(h) => SegmentAssignment::hierarchical(n, h.ranks, h.lanes),
        }
    }
}
