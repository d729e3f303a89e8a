use super::*;
use crate::circuits::CircuitKind;
use crate::operators::{inputs, sequential_scan, CostModel, Int64Add, ModularAffineOp, DEFAULT_MODULUS};
use crate::sim::{critical_path, work_account, Phase, SimEnv};
use crate::Error;

fn modular(n: usize, seed: u32) -> (ModularAffineOp, Vec<crate::operators::ModularAffine>) {
    (
        ModularAffineOp::default(),
        inputs::modular_affine(n, DEFAULT_MODULUS, seed),
    )
}

#[test]
fn partition_examples() {
    let a = partition(8, 4).unwrap();
    assert_eq!(a.ranges(), &[0..2, 2..4, 4..6, 6..8]);
    assert_eq!(a.bounds(1), (2, 3));
    assert_eq!(partition(10, 4).unwrap().lengths(), vec![3, 3, 2, 2]);
    assert!(partition(4096, 64).unwrap().lengths().iter().all(|&k| k == 64));
    assert!(matches!(
        partition(3, 4),
        Err(Error::TooFewElements { n: 3, workers: 4 })
    ));
    assert!(partition(3, 0).is_err());
}

#[test]
fn hierarchical_assignment_splits_ranks_then_lanes() {
    let a = SegmentAssignment::hierarchical(22, 2, 3).unwrap();
    assert_eq!(a.lengths(), vec![4, 4, 3, 4, 4, 3]);
    assert!(SegmentAssignment::hierarchical(5, 2, 3).is_err());
    assert!(SegmentAssignment::from_ranges(4, vec![0..2, 3..4]).is_err());
    assert!(SegmentAssignment::from_ranges(4, vec![0..2, 2..4]).is_ok());
}

#[test]
fn imbalance_examples() {
    assert_eq!(imbalance(&[7; 12], &partition(12, 3).unwrap()), 0.0);
    let a = SegmentAssignment::from_ranges(3, vec![0..1, 1..2, 2..3]).unwrap();
    assert!((imbalance(&[10, 10, 20], &a) - 0.5).abs() < 1e-12);
}

#[test]
fn scan_then_map_int64() {
    let xs: Vec<i64> = (1..=16).collect();
    let plan = StrategyPlan::flat(Strategy::ScanThenMap, 4, CircuitKind::Dissemination);
    let (ys, trace) = scan_then_map(&Int64Add, &xs, &plan, &SimEnv::default()).unwrap();
    assert_eq!(ys, sequential_scan(&Int64Add, &xs).unwrap());
    assert_eq!(ys[15], 136);
    assert_eq!(
        trace
            .events_in(Phase::Local2)
            .filter(|e| e.worker == 0 && e.kind.is_application())
            .count(),
        0
    );
    let predicted = predict(Strategy::ScanThenMap, 16, 4, CircuitKind::Dissemination).unwrap();
    assert_eq!(trace.total_combines(), predicted.work);
    assert_eq!(critical_path(&trace), 8);
}

#[test]
fn reduce_then_scan_int64() {
    let xs: Vec<i64> = (1..=8).collect();
    let plan = StrategyPlan::flat(Strategy::ReduceThenScan, 2, CircuitKind::Dissemination);
    let (ys, trace) = reduce_then_scan(&Int64Add, &xs, &plan, &SimEnv::default()).unwrap();
    assert_eq!(ys, vec![1, 3, 6, 10, 15, 21, 28, 36]);
    assert_eq!(work_account(&trace).local2, 8);
}

#[test]
fn strategies_agree_with_oracle() {
    let (op, xs) = modular(123, 9);
    let oracle = sequential_scan(&op, &xs).unwrap();
    for kind in CircuitKind::ALL {
        for strategy in Strategy::ALL {
            let plan = StrategyPlan::flat(strategy, 7, kind);
            let (ys, _) = run_plan(&op, &xs, &plan, &SimEnv::default()).unwrap();
            assert_eq!(ys, oracle, "{}", plan.label());
        }
    }
}

#[test]
fn hierarchical_matches_flat_and_oracle() {
    let (op, xs) = modular(256, 4);
    let oracle = sequential_scan(&op, &xs).unwrap();
    let (ys, _) = hierarchical_scan(
        &op,
        &xs,
        &StrategyPlan::hierarchical(4, 4, CircuitKind::LadnerFischer),
        &SimEnv::default(),
    )
    .unwrap();
    assert_eq!(ys, oracle);

    let flat = StrategyPlan::flat(Strategy::ReduceThenScan, 6, CircuitKind::Dissemination);
    let single_rank = StrategyPlan::hierarchical(1, 6, CircuitKind::Dissemination);
    let (a, _) = reduce_then_scan(&op, &xs, &flat, &SimEnv::default()).unwrap();
    let (b, _) = hierarchical_scan(&op, &xs, &single_rank, &SimEnv::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn hierarchical_rejects_blelloch_across_ranks() {
    let (op, xs) = modular(64, 1);
    let plan = StrategyPlan::hierarchical(4, 2, CircuitKind::Blelloch);
    assert!(matches!(
        hierarchical_scan(&op, &xs, &plan, &SimEnv::default()),
        Err(Error::UnsupportedCircuit {
            kind: CircuitKind::Blelloch,
            ..
        })
    ));
    // Within a rank any circuit works.
    let plan = StrategyPlan::hierarchical(4, 4, CircuitKind::Dissemination).with_local(CircuitKind::Blelloch);
    let (ys, _) = hierarchical_scan(&op, &xs, &plan, &SimEnv::default()).unwrap();
    assert_eq!(ys, sequential_scan(&op, &xs).unwrap());
}

#[test]
fn hierarchical_depth_and_work_match_prediction() {
    let xs = inputs::int64(512, 3);
    for (ranks, lanes) in [(4, 4), (2, 8), (8, 2), (1, 16), (16, 1)] {
        for global in [
            CircuitKind::Dissemination,
            CircuitKind::LadnerFischer,
            CircuitKind::BinomialTree,
        ] {
            let plan = StrategyPlan::hierarchical(ranks, lanes, global);
            let (_, trace) = hierarchical_scan(&Int64Add, &xs, &plan, &SimEnv::default()).unwrap();
            let p = predict_plan(&plan, 512).unwrap();
            assert_eq!(trace.total_combines(), p.work, "{}", plan.label());
            assert_eq!(critical_path(&trace), p.depth, "{}", plan.label());
            assert_eq!(trace.makespan(), p.depth, "{}", plan.label());
        }
    }
}

#[test]
fn hierarchical_log_terms_add_up() {
    // C1·log2 T + C1·log2 P′ = C1·log2 P for power-of-two splits.
    let flat = predict(Strategy::ReduceThenScan, 1024, 16, CircuitKind::Dissemination).unwrap();
    let h = predict_hierarchical(1024, 4, 4, CircuitKind::Dissemination, CircuitKind::Dissemination).unwrap();
    assert_eq!(flat.depth, h.depth);
}

#[test]
fn predict_examples() {
    let p = predict(Strategy::ReduceThenScan, 4096, 64, CircuitKind::Dissemination).unwrap();
    assert_eq!(p.depth, 133);
    let p = predict(Strategy::ScanThenMap, 16, 4, CircuitKind::Sequential).unwrap();
    assert_eq!(p.work, 24);
    for s in Strategy::ALL {
        assert_eq!(predict(s, 100, 1, CircuitKind::Dissemination).unwrap().depth, 99);
    }
    assert!(matches!(
        predict(Strategy::ReduceThenScan, 10, 4, CircuitKind::Dissemination),
        Err(Error::UnevenDivision { .. })
    ));
    let p = predict(Strategy::ScanThenMap, 64, 8, CircuitKind::LadnerFischer).unwrap();
    assert_eq!(p.depth, p.local1.depth + p.global.depth + p.local2.depth);
    assert_eq!(p.work, p.local1.work + p.global.work + p.local2.work);
}

#[test]
fn speedup_bound_examples() {
    assert_eq!(speedup_bound(BoundKind::Scan, 4096, 1, 1), 1.0);
    assert!((speedup_bound(BoundKind::Scan, 4096, 1024, 1) - 4095.0 / 17.0).abs() < 1e-9);
    assert!((speedup_bound(BoundKind::Full, 4096, 1024, 1) - 8191.0 / 21.0).abs() < 1e-9);
}

#[test]
fn weak_scaling_examples() {
    let d = |k| weak_scaling_delta(Strategy::ReduceThenScan, 512, 64, k, CircuitKind::Dissemination).unwrap();
    assert_eq!(d(1), 0);
    assert_eq!(d(4), 2);
    assert_eq!(d(8), 3);
    assert_eq!(
        weak_scaling_delta(Strategy::ScanThenMap, 64, 8, 4, CircuitKind::Blelloch).unwrap(),
        4
    );
    assert!(weak_scaling_delta(Strategy::ScanThenMap, 64, 8, 3, CircuitKind::Blelloch).is_err());
}

#[test]
fn latency_delays_but_does_not_change_results() {
    let (op, xs) = modular(96, 2);
    let plan = StrategyPlan::hierarchical(4, 3, CircuitKind::Dissemination);
    let env = SimEnv {
        latency: 100,
        ..SimEnv::default()
    };
    let (a, fast) = hierarchical_scan(&op, &xs, &plan, &SimEnv::default()).unwrap();
    let (b, slow) = hierarchical_scan(&op, &xs, &plan, &env).unwrap();
    assert_eq!(a, b);
    // Two global rounds plus the hand-off into the rescan.
    assert_eq!(slow.makespan(), fast.makespan() + 300);
}

#[test]
fn exponential_costs_drive_makespan() {
    let xs = inputs::int64(256, 1);
    let plan = StrategyPlan::flat(Strategy::ReduceThenScan, 8, CircuitKind::Dissemination);
    let env = SimEnv::new(CostModel::Exponential { mean: 1000, seed: 7 });
    let (_, t1) = reduce_then_scan(&Int64Add, &xs, &plan, &env).unwrap();
    let (_, t2) = reduce_then_scan(&Int64Add, &xs, &plan, &env).unwrap();
    assert_eq!(t1, t2);
    assert!(t1.makespan() > 20_000);
}
