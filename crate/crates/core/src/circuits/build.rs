use super::{Circuit, CircuitKind, Gate, Stage};
use crate::{Error, Result};

pub fn build(kind: CircuitKind, n: usize) -> Result<Circuit> {
    match kind {
        CircuitKind::Sequential => build_sequential(n),
        CircuitKind::Blelloch => build_blelloch(n),
        CircuitKind::Dissemination => build_dissemination(n),
        CircuitKind::LadnerFischer => build_ladner_fischer(n),
        CircuitKind::BinomialTree => build_binomial_tree(n),
    }
}

fn check(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::ZeroSlots)
    } else {
        Ok(())
    }
}

fn finish(kind: CircuitKind, n: usize, stages: Vec<Stage>) -> Circuit {
    let stages: Vec<Stage> = stages.into_iter().filter(|s| !s.is_empty()).collect();
    let core = stages.len();
    Circuit::new(kind, n, (0..n).collect(), stages, core)
}

/// One combine per stage, left to right.
pub fn build_sequential(n: usize) -> Result<Circuit> {
    check(n)?;
    let stages = (1..n).map(|i| vec![Gate::Prepend { src: i - 1, dst: i }]).collect();
    Ok(finish(CircuitKind::Sequential, n, stages))
}

/// Stage `i` combines every slot `j ≥ 2^i` with slot `j − 2^i`.
pub fn build_dissemination(n: usize) -> Result<Circuit> {
    check(n)?;
    let mut stages = Vec::new();
    let mut dist = 1;
    while dist < n {
        stages.push((dist..n).map(|j| Gate::Prepend { src: j - dist, dst: j }).collect());
        dist *= 2;
    }
    Ok(finish(CircuitKind::Dissemination, n, stages))
}

/// Up-sweep reduction tree followed by the distributing down-sweep; handles
/// any `n` without padding.
pub fn build_binomial_tree(n: usize) -> Result<Circuit> {
    check(n)?;
    let mut stages = Vec::new();
    let mut top = 0;
    while (2usize << top) <= n {
        let half = 1 << top;
        let stride = half * 2;
        stages.push(
            (stride - 1..n)
                .step_by(stride)
                .map(|i| Gate::Prepend { src: i - half, dst: i })
                .collect(),
        );
        top += 1;
    }
    for k in (1..=top).rev() {
        let stride = 1usize << k;
        let half = stride / 2;
        stages.push(
            (stride - 1 + half..n)
                .step_by(stride)
                .map(|i| Gate::Prepend { src: i - half, dst: i })
                .collect(),
        );
    }
    Ok(finish(CircuitKind::BinomialTree, n, stages))
}

/// Work-efficient exclusive tree scan, converted to inclusive output with one
/// extra stage.
///
/// Inputs are padded with identities up to the next power of two. Layout:
/// `[0, m)` tree slots (padding homed on the last input), `[m, m + n − 1)`
/// saved copies of the inputs, then one slot holding the total. The core
/// stages perform `2(m − 1)` combines over `2·log2 m` stages; the conversion
/// stage adds `n − 1` combines and takes the last output from the saved
/// total.
pub fn build_blelloch(n: usize) -> Result<Circuit> {
    check(n)?;
    if n == 1 {
        return Ok(finish(CircuitKind::Blelloch, 1, Vec::new()));
    }
    let m = n.next_power_of_two();
    let saved = |i: usize| m + i;
    let total = m + n - 1;
    let mut home: Vec<usize> = (0..m).map(|i| i.min(n - 1)).collect();
    home.extend(0..n - 1);
    home.push(n - 1);

    let mut stages: Vec<Stage> = Vec::new();
    let mut prep: Stage = (0..n - 1).map(|i| Gate::Copy { src: i, dst: saved(i) }).collect();
    prep.extend((n..m).map(|dst| Gate::Identity { dst }));
    stages.push(prep);

    let levels = m.trailing_zeros() as usize;
    for d in 0..levels {
        let half = 1 << d;
        let stride = half * 2;
        stages.push(
            (stride - 1..m)
                .step_by(stride)
                .map(|i| Gate::Prepend { src: i - half, dst: i })
                .collect(),
        );
    }
    stages.push(vec![
        Gate::Copy { src: m - 1, dst: total },
        Gate::Identity { dst: m - 1 },
    ]);
    for d in (0..levels).rev() {
        let half = 1 << d;
        let stride = half * 2;
        stages.push(
            (stride - 1..m)
                .step_by(stride)
                .flat_map(|i| {
                    [
                        Gate::Append { src: i - half, dst: i },
                        Gate::Copy { src: i, dst: i - half },
                    ]
                })
                .collect(),
        );
    }
    let core = stages.len();
    let mut convert: Stage = (0..n - 1).map(|i| Gate::Append { src: saved(i), dst: i }).collect();
    convert.push(Gate::Copy { src: total, dst: n - 1 });
    stages.push(convert);

    Ok(Circuit::new(CircuitKind::Blelloch, n, home, stages, core))
}

/// Depth-optimal member of the Ladner–Fischer family.
///
/// `P0(n)` scans the leading power-of-two block with `P1` and the rest with
/// `P0`, then fans the block total out to the rest. `Pk` for `k ≥ 1` combines
/// neighbouring pairs, recurses with `P(k−1)` on the pair results and fixes
/// the even positions. Gates are emitted in program order and packed into
/// stages as early as their dependencies allow.
pub fn build_ladner_fischer(n: usize) -> Result<Circuit> {
    check(n)?;
    let mut gates = Vec::new();
    let slots: Vec<usize> = (0..n).collect();
    ladner_fischer(&slots, 0, &mut gates);
    let stages = schedule(n, &gates);
    Ok(finish(CircuitKind::LadnerFischer, n, stages))
}

fn ladner_fischer(slots: &[usize], k: u32, gates: &mut Vec<Gate>) {
    let m = slots.len();
    if m <= 1 {
        return;
    }
    if m == 2 {
        gates.push(Gate::Prepend {
            src: slots[0],
            dst: slots[1],
        });
        return;
    }
    if k == 0 {
        let block = m.next_power_of_two() / 2;
        let (left, right) = slots.split_at(block);
        ladner_fischer(left, 1, gates);
        ladner_fischer(right, 0, gates);
        let carry = *left.last().expect("non-empty block");
        gates.extend(right.iter().map(|&dst| Gate::Prepend { src: carry, dst }));
    } else {
        for i in (1..m).step_by(2) {
            gates.push(Gate::Prepend {
                src: slots[i - 1],
                dst: slots[i],
            });
        }
        let mut reduced: Vec<usize> = (1..m).step_by(2).map(|i| slots[i]).collect();
        if m % 2 == 1 {
            reduced.push(slots[m - 1]);
        }
        ladner_fischer(&reduced, k - 1, gates);
        let last_fixed = if m % 2 == 1 { m - 1 } else { m };
        for i in (2..last_fixed).step_by(2) {
            gates.push(Gate::Prepend {
                src: slots[i - 1],
                dst: slots[i],
            });
        }
    }
}

/// ASAP stage assignment for a program-ordered list of in-place gates under
/// snapshot-per-stage semantics: a gate runs after the last write of every
/// slot it touches and no earlier than the last read of the slot it writes.
fn schedule(slots: usize, gates: &[Gate]) -> Vec<Stage> {
    let mut written = vec![0usize; slots];
    let mut read = vec![0usize; slots];
    let mut stages: Vec<Stage> = Vec::new();
    for g in gates {
        let dst = g.dst();
        let mut level = written[dst] + 1;
        if let Some(src) = g.src() {
            level = level.max(written[src] + 1);
        }
        level = level.max(read[dst]);
        if let Some(src) = g.src() {
            read[src] = read[src].max(level);
        }
        read[dst] = read[dst].max(level);
        written[dst] = level;
        if stages.len() < level {
            stages.resize_with(level, Vec::new);
        }
        stages[level - 1].push(*g);
    }
    stages
}
