//! Local–global–local scan strategies over many workers, the hierarchical
//! ranks × lanes decomposition and closed-form depth/work predictors.
//!
//! Every run executes on the virtual clock of [`crate::sim`] and returns the
//! scan together with its [`Trace`](crate::sim::Trace).

mod partition;
mod plan;
mod predict;
mod run;

pub use partition::{imbalance, partition, SegmentAssignment};
pub use plan::{Hierarchy, Strategy, StrategyPlan};
pub use predict::{
    predict, predict_hierarchical, predict_plan, speedup_bound, weak_scaling_delta, BoundKind, DepthWorkPrediction,
    PhaseCost,
};
pub use run::{hierarchical_scan, reduce_then_scan, run_plan, scan_then_map};

pub(crate) use run::{hierarchical_tail, Run};

#[cfg(test)]
mod tests;
