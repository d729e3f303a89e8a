//! Work stealing between neighbouring lanes during the first phase of a
//! hierarchical scan.
//!
//! Lanes of a rank start inside their static segments (the first at its
//! left end, the last at its right end, the others in the middle) and grow
//! their processed range one element at a time into the gaps on either side.
//! A lane extending leftwards pre-composes, `x[pl − 1] ⊙ res`, so each
//! lane's result stays the in-order fold of its range. The gaps between
//! lanes are the only shared state: [`Gap::claim`] hands each index to
//! exactly one lane.

mod des;
mod gap;
mod lane;

pub use des::{dynamic_hierarchical_scan, reduce_makespan, static_reduce, steal_reduce, LaneOutcome};
pub use gap::{Gap, Side};
pub use lane::{choose_direction, Direction, LaneState, Neighbor, RateEstimate, StartPolicy};

pub(crate) use des::initial_gaps;

#[cfg(test)]
mod tests {
    use std::sync::Arc;
    use std::thread;

    use super::*;
    use crate::circuits::CircuitKind;
    use crate::distributed::{hierarchical_scan, StrategyPlan};
    use crate::operators::{inputs, sequential_scan, CostModel, CostTable, Int64Add, ModularAffineOp, DEFAULT_MODULUS};
    use crate::sim::{work_account, SimEnv};

    fn lane(last: Option<Direction>) -> LaneState<()> {
        let mut s = LaneState::new(1, 5, (), StartPolicy::MiddleOutward);
        s.last_move = last;
        s
    }

    fn open(remaining: usize, rate: f64) -> Neighbor {
        Neighbor { remaining, rate }
    }

    #[test]
    fn direction_examples() {
        let s = lane(Some(Direction::Right));
        assert_eq!(
            choose_direction(&s, Neighbor::CLOSED, Neighbor::CLOSED),
            Direction::Done
        );
        assert_eq!(choose_direction(&s, open(3, 5e6), open(3, 2e6)), Direction::Left);
        assert_eq!(choose_direction(&s, open(3, 2e6), open(3, 5e6)), Direction::Right);
        assert_eq!(choose_direction(&s, Neighbor::CLOSED, open(7, 1.0)), Direction::Right);
        assert_eq!(choose_direction(&s, open(7, 1.0), Neighbor::CLOSED), Direction::Left);
    }

    #[test]
    fn first_move_is_right_and_ties_alternate() {
        assert_eq!(
            choose_direction(&lane(None), open(3, 9.0), open(3, 1.0)),
            Direction::Right
        );
        assert_eq!(
            choose_direction(&lane(Some(Direction::Right)), open(3, 1.0), open(3, 1.0)),
            Direction::Left
        );
        assert_eq!(
            choose_direction(&lane(Some(Direction::Left)), open(3, 1.0), open(3, 1.0)),
            Direction::Right
        );
    }

    #[test]
    fn rate_uses_prior_then_recent_window() {
        let mut r = RateEstimate::new(2, 10.0);
        assert_eq!(r.rate(), 10.0);
        r.record(4);
        assert_eq!(r.rate(), 4.0);
        r.record(8);
        r.record(2);
        assert_eq!(r.rate(), 5.0);
        assert_eq!((r.ops_done(), r.elapsed()), (3, 14));
    }

    #[test]
    fn gap_claims() {
        let g = Gap::new(5, 8);
        assert_eq!(g.claim(Side::FromLeftLane), Some(5));
        assert_eq!(g.claim(Side::FromLeftLane), Some(6));
        assert_eq!(g.claim(Side::FromRightLane), Some(7));
        assert_eq!(g.claim(Side::FromRightLane), None);
        assert!(g.is_empty());
        let one = Gap::new(3, 4);
        assert_eq!(one.remaining(), 1);
        assert_eq!(one.claim(Side::FromRightLane), Some(3));
        assert_eq!(one.claim(Side::FromLeftLane), None);
    }

    #[test]
    fn concurrent_claims_partition_the_gap() {
        const N: usize = 100_000;
        let gap = Arc::new(Gap::new(0, N));
        let take = |side| {
            let gap = Arc::clone(&gap);
            thread::spawn(move || std::iter::from_fn(|| gap.claim(side)).collect::<Vec<_>>())
        };
        let (l, r) = (take(Side::FromLeftLane), take(Side::FromRightLane));
        let (l, r) = (l.join().unwrap(), r.join().unwrap());
        assert!(l.windows(2).all(|w| w[1] == w[0] + 1));
        assert!(r.windows(2).all(|w| w[1] + 1 == w[0]));
        assert_eq!(l.len() + r.len(), N);
        if let (Some(a), Some(b)) = (l.last(), r.last()) {
            assert_eq!(a + 1, *b);
        }
    }

    #[test]
    fn single_lane_folds_the_segment() {
        let xs: Vec<i64> = (1..=10).collect();
        let costs = CostTable::from_costs(vec![1; 10], 1);
        let (out, _) = steal_reduce(&Int64Add, &xs, 2..9, 1, &costs, 2).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].range, 2..9);
        assert_eq!(out[0].value, (3..=9).sum::<i64>());
        assert!(steal_reduce(&Int64Add, &xs, 0..2, 3, &costs, 2).is_err());
    }

    #[test]
    fn stealing_shortens_the_slow_middle() {
        let costs = CostTable::from_costs(vec![1, 1, 1, 1, 1, 5, 5, 5, 1, 1, 1, 1], 1);
        let xs = inputs::modular_affine(12, DEFAULT_MODULUS, 3);
        let op = ModularAffineOp::default();
        let (fixed, _) = static_reduce(&op, &xs, 0..12, 3, &costs).unwrap();
        assert_eq!(reduce_makespan(&fixed), 15);
        let (out, trace) = steal_reduce(&op, &xs, 0..12, 3, &costs, 2).unwrap();
        assert!(reduce_makespan(&out) < 15);
        assert_eq!(trace.makespan(), reduce_makespan(&out));
        let ranges: Vec<_> = out.iter().map(|o| o.range.clone()).collect();
        assert_eq!(ranges.first().unwrap().start, 0);
        assert!(ranges.windows(2).all(|w| w[0].end == w[1].start));
        assert_eq!(ranges.last().unwrap().end, 12);
        for o in &out {
            assert_eq!(Some(o.value), crate::operators::fold(&op, &xs[o.range.clone()]));
        }
    }

    #[test]
    fn uniform_costs_keep_the_static_split() {
        for (n, t) in [(48, 4), (50, 4), (36, 12), (97, 5), (12, 3)] {
            let costs = CostTable::from_costs(vec![3; n], 3);
            let xs = inputs::int64(n, 1);
            let (out, _) = steal_reduce(&Int64Add, &xs, 0..n, t, &costs, 2).unwrap();
            let statics = crate::distributed::partition(n, t).unwrap();
            for o in &out {
                assert_eq!(o.range, statics.range(o.lane), "n={n} t={t}");
                assert_eq!(o.stolen, 0);
            }
        }
    }

    #[test]
    fn every_element_is_folded_exactly_once() {
        let n = 1000;
        let model = CostModel::Exponential { mean: 100, seed: 21 };
        let costs = CostTable::generate(&model, &crate::distributed::partition(n, 7).unwrap().lengths());
        let xs = inputs::int64(n, 2);
        let (out, trace) = steal_reduce(&Int64Add, &xs, 0..n, 7, &costs, 2).unwrap();
        let statics = crate::distributed::partition(n, 7).unwrap();
        let mut seen = vec![0u8; n];
        for o in &out {
            seen[StartPolicy::for_lane(o.lane, 7).start(&statics.range(o.lane))] += 1;
        }
        for e in &trace.events {
            seen[e.src.unwrap()] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(out.iter().map(|o| o.ops).sum::<u64>(), (n - 7) as u64);
    }

    #[test]
    fn no_lane_finishes_while_its_gaps_hold_work() {
        let n = 600;
        let model = CostModel::Exponential { mean: 100, seed: 5 };
        let costs = CostTable::generate(&model, &crate::distributed::partition(n, 6).unwrap().lengths());
        let xs = inputs::int64(n, 2);
        let (out, trace) = steal_reduce(&Int64Add, &xs, 0..n, 6, &costs, 2).unwrap();
        // A lane stops only after the neighbouring ranges reached its own:
        // every element next to its range was claimed by someone at or
        // before its finish.
        let claimed_at: std::collections::HashMap<usize, u64> =
            trace.events.iter().map(|e| (e.src.unwrap(), e.start)).collect();
        for o in &out {
            for edge in [o.range.start.checked_sub(1), Some(o.range.end).filter(|&e| e < n)] {
                if let Some(i) = edge {
                    if let Some(&t) = claimed_at.get(&i) {
                        assert!(t <= o.finish, "lane {} idle before {i} was claimed", o.lane);
                    }
                }
            }
        }
    }

    #[test]
    fn dynamic_scan_matches_oracle() {
        let op = ModularAffineOp::default();
        let xs = inputs::modular_affine(512, DEFAULT_MODULUS, 77);
        let env = SimEnv::new(CostModel::Exponential { mean: 1000, seed: 1410 });
        let plan = StrategyPlan::dynamic(4, 4, CircuitKind::Dissemination);
        let (ys, trace) = dynamic_hierarchical_scan(&op, &xs, &plan, &env).unwrap();
        assert_eq!(ys, sequential_scan(&op, &xs).unwrap());
        assert_eq!(work_account(&trace).local2, 512);
    }

    #[test]
    fn dynamic_with_uniform_costs_equals_static() {
        let xs = inputs::int64(240, 4);
        let plan = StrategyPlan::dynamic(2, 5, CircuitKind::LadnerFischer);
        let env = SimEnv::default();
        let (a, ta) = dynamic_hierarchical_scan(&Int64Add, &xs, &plan, &env).unwrap();
        let (b, tb) = hierarchical_scan(&Int64Add, &xs, &plan.to_static(), &env).unwrap();
        assert_eq!(a, b);
        assert_eq!(work_account(&ta), work_account(&tb));
        assert_eq!(ta.makespan(), tb.makespan());
    }
}
