use serde::Serialize;

use super::plan::{Strategy, StrategyPlan};
use crate::circuits::{build, CircuitKind, CircuitMetrics};
use crate::{Error, Result};

/// Critical-path length and operation count of one phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PhaseCost {
    pub depth: u64,
    pub work: u64,
}

/// Closed-form depth and work of a distributed scan with unit-cost
/// operators, split into its three phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DepthWorkPrediction {
    pub depth: u64,
    pub work: u64,
    pub local1: PhaseCost,
    /// Global scan, including any scan over the lanes of a rank.
    pub global: PhaseCost,
    pub local2: PhaseCost,
}

impl DepthWorkPrediction {
    fn from_phases(local1: PhaseCost, global: PhaseCost, local2: PhaseCost) -> Self {
        Self {
            depth: local1.depth + global.depth + local2.depth,
            work: local1.work + global.work + local2.work,
            local1,
            global,
            local2,
        }
    }

    fn serial(n: u64) -> Self {
        let c = PhaseCost {
            depth: n - 1,
            work: n - 1,
        };
        Self::from_phases(c, PhaseCost::default(), PhaseCost::default())
    }
}

fn even(n: usize, p: usize) -> Result<u64> {
    if p == 0 || n < p {
        return Err(Error::TooFewElements { n, workers: p });
    }
    if n % p != 0 {
        return Err(Error::UnevenDivision { n, workers: p });
    }
    Ok((n / p) as u64)
}

fn circuit_metrics(kind: CircuitKind, slots: usize) -> Result<CircuitMetrics> {
    Ok(build(kind, slots)?.metrics())
}

/// Depth and work of a flat strategy over `p` workers. Requires `p | n`.
pub fn predict(strategy: Strategy, n: usize, p: usize, global: CircuitKind) -> Result<DepthWorkPrediction> {
    let k = even(n, p)?;
    if p == 1 {
        return Ok(DepthWorkPrediction::serial(n as u64));
    }
    let (n, p) = (n as u64, p as u64);
    let g = circuit_metrics(global, p as usize)?;
    let gs = PhaseCost {
        depth: g.depth,
        work: g.work,
    };
    Ok(match strategy {
        Strategy::ScanThenMap => DepthWorkPrediction::from_phases(
            PhaseCost {
                depth: k - 1,
                work: p * (k - 1),
            },
            gs,
            PhaseCost {
                depth: k - 1,
                work: (p - 1) * (k - 1),
            },
        ),
        Strategy::ReduceThenScan => DepthWorkPrediction::from_phases(
            PhaseCost {
                depth: k - 1,
                work: n - p,
            },
            gs,
            PhaseCost { depth: k, work: n },
        ),
    })
}

/// Depth and work of a hierarchical reduce-then-scan over `ranks × lanes`
/// workers: a `local` circuit over the lanes of each rank, and a `global`
/// circuit over ranks whose every combine is applied by all lanes.
pub fn predict_hierarchical(
    n: usize,
    ranks: usize,
    lanes: usize,
    global: CircuitKind,
    local: CircuitKind,
) -> Result<DepthWorkPrediction> {
    let p = ranks * lanes;
    let k = even(n, p)?;
    if p == 1 {
        return Ok(DepthWorkPrediction::serial(n as u64));
    }
    let l = circuit_metrics(local, lanes)?;
    let g = circuit_metrics(global, ranks)?;
    let (n, ranks_u, lanes_u) = (n as u64, ranks as u64, lanes as u64);
    Ok(DepthWorkPrediction::from_phases(
        PhaseCost {
            depth: k - 1,
            work: n - ranks_u * lanes_u,
        },
        PhaseCost {
            depth: l.depth + g.depth,
            work: ranks_u * l.work + lanes_u * g.work,
        },
        PhaseCost { depth: k, work: n },
    ))
}

/// Prediction for any static plan.
pub fn predict_plan(plan: &StrategyPlan, n: usize) -> Result<DepthWorkPrediction> {
    plan.validate(n)?;
    match plan.hierarchy {
        None => predict(plan.strategy, n, plan.workers, plan.global),
        Some(h) => predict_hierarchical(n, h.ranks, h.lanes, plan.global, plan.local_kind()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    /// The scan alone: `N − 1` serial applications.
    Scan,
    /// The scan preceded by `N` independent preprocessing steps.
    Full,
}

/// Upper bound on the speedup of a distributed scan over the serial one,
/// for a global circuit of depth `c1·log2 p`.
///
/// `Scan`: `(N − 1) / (2N/P − 1 + c1·log2 P)`;
/// `Full`: `(2N − 1) / (3N/P − 1 + c1·log2 P)`. One worker gives 1.
pub fn speedup_bound(kind: BoundKind, n: usize, p: usize, c1: u64) -> f64 {
    if p <= 1 {
        return 1.0;
    }
    let (n, p) = (n as f64, p as f64);
    let k = n / p;
    let log = c1 as f64 * p.log2();
    match kind {
        BoundKind::Scan => (n - 1.0) / (2.0 * k - 1.0 + log),
        BoundKind::Full => (2.0 * n - 1.0) / (3.0 * k - 1.0 + log),
    }
}

/// Growth in predicted depth when both `n` and `p` are multiplied by `k`.
///
/// For circuits of depth `c1·log2 p + c2` this is `c1·log2 k`; a different
/// value is reported as [`Error::WeakScalingMismatch`].
pub fn weak_scaling_delta(strategy: Strategy, n: usize, p: usize, k: usize, global: CircuitKind) -> Result<i64> {
    if !k.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "scaling factor {k} is not a power of two"
        )));
    }
    let base = predict(strategy, n, p, global)?.depth as i64;
    let scaled = predict(strategy, k * n, k * p, global)?.depth as i64;
    let delta = scaled - base;
    if let Some(c1) = global.log_depth_factor() {
        // With one worker there is no global circuit to grow from.
        let expected = (c1 * u64::from(k.trailing_zeros())) as i64;
        if p > 1 && delta != expected {
            return Err(Error::WeakScalingMismatch { delta, expected });
        }
    }
    Ok(delta)
}
