//! Classical scan circuits as explicit staged schedules.
//!
//! A circuit works on `slots` value slots; the first `n` hold the inputs and,
//! after evaluation, the inclusive scan. Additional scratch slots (Blelloch
//! padding, saved inputs, the saved total) each have a home data slot, which
//! is the worker that owns them when the circuit runs distributed.
//!
//! Gates in one stage read the values present at the start of that stage and
//! no two gates of a stage write the same slot, so a stage can run in
//! parallel. Only combining gates count as work; copies and identity
//! initialisations are free.

mod build;

use std::fmt::{self, Write as _};
use std::str::FromStr;

pub use build::{
    build, build_binomial_tree, build_blelloch, build_dissemination, build_ladner_fischer, build_sequential,
};

use crate::operators::ScanOp;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircuitKind {
    Sequential,
    Blelloch,
    Dissemination,
    LadnerFischer,
    /// Brent–Kung style up/down binomial tree. Stands in for a vendor
    /// `MPI_Scan` baseline.
    BinomialTree,
}

impl CircuitKind {
    pub const ALL: [CircuitKind; 5] = [
        CircuitKind::Sequential,
        CircuitKind::Blelloch,
        CircuitKind::Dissemination,
        CircuitKind::LadnerFischer,
        CircuitKind::BinomialTree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CircuitKind::Sequential => "sequential",
            CircuitKind::Blelloch => "blelloch",
            CircuitKind::Dissemination => "dissemination",
            CircuitKind::LadnerFischer => "ladner-fischer",
            CircuitKind::BinomialTree => "binomial-tree",
        }
    }

    /// Whether built circuits only prepend onto their destinations.
    pub fn is_prefix_form(self) -> bool {
        self != CircuitKind::Blelloch
    }

    /// `C1` in `depth = C1·log2 N + C2`; `None` for linear-depth circuits.
    pub fn log_depth_factor(self) -> Option<u64> {
        match self {
            CircuitKind::Sequential => None,
            CircuitKind::Dissemination | CircuitKind::LadnerFischer => Some(1),
            CircuitKind::Blelloch | CircuitKind::BinomialTree => Some(2),
        }
    }
}

impl fmt::Display for CircuitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CircuitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let alias = match s {
            "lf" => Some(CircuitKind::LadnerFischer),
            "tree" | "library" | "mpi" => Some(CircuitKind::BinomialTree),
            "seq" => Some(CircuitKind::Sequential),
            _ => None,
        };
        alias
            .or_else(|| CircuitKind::ALL.into_iter().find(|k| k.name() == s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown circuit `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    /// `x[dst] ← x[src] ⊙ x[dst]`
    Prepend { src: usize, dst: usize },
    /// `x[dst] ← x[dst] ⊙ x[src]`
    Append { src: usize, dst: usize },
    /// `x[dst] ← x[src]`
    Copy { src: usize, dst: usize },
    /// `x[dst] ← e`
    Identity { dst: usize },
}

impl Gate {
    pub fn dst(&self) -> usize {
        match *self {
            Gate::Prepend { dst, .. } | Gate::Append { dst, .. } | Gate::Copy { dst, .. } | Gate::Identity { dst } => {
                dst
            }
        }
    }

    pub fn src(&self) -> Option<usize> {
        match *self {
            Gate::Prepend { src, .. } | Gate::Append { src, .. } | Gate::Copy { src, .. } => Some(src),
            Gate::Identity { .. } => None,
        }
    }

    pub fn is_combine(&self) -> bool {
        matches!(self, Gate::Prepend { .. } | Gate::Append { .. })
    }

    fn label(&self) -> &'static str {
        match self {
            Gate::Prepend { .. } => "prepend",
            Gate::Append { .. } => "append",
            Gate::Copy { .. } => "copy",
            Gate::Identity { .. } => "identity",
        }
    }
}

pub type Stage = Vec<Gate>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    kind: CircuitKind,
    n: usize,
    home: Vec<usize>,
    stages: Vec<Stage>,
    /// Stages that make up the textbook circuit; later stages are
    /// conversions (Blelloch's exclusive-to-inclusive shift).
    core_stages: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct CircuitMetrics {
    /// Stages containing at least one combine.
    pub depth: u64,
    /// Combine gates.
    pub work: u64,
    pub core_depth: u64,
    pub core_work: u64,
}

impl Circuit {
    pub(crate) fn new(kind: CircuitKind, n: usize, home: Vec<usize>, stages: Vec<Stage>, core_stages: usize) -> Self {
        let stages: Vec<Stage> = stages.into_iter().collect();
        debug_assert!(home.len() >= n);
        Self {
            kind,
            n,
            home,
            stages,
            core_stages,
        }
    }

    pub fn kind(&self) -> CircuitKind {
        self.kind
    }

    /// Number of inputs.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of slots, scratch included.
    pub fn slots(&self) -> usize {
        self.home.len()
    }

    /// Data slot that owns `slot`.
    pub fn home(&self, slot: usize) -> usize {
        self.home[slot]
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn gates(&self) -> impl Iterator<Item = (usize, &Gate)> {
        self.stages
            .iter()
            .enumerate()
            .flat_map(|(s, stage)| stage.iter().map(move |g| (s, g)))
    }

    /// True when every gate prepends a value onto its destination, which
    /// lets a rank mirror each gate onto several per-lane values.
    pub fn is_prefix_form(&self) -> bool {
        self.gates().all(|(_, g)| matches!(g, Gate::Prepend { .. }))
    }

    pub fn metrics(&self) -> CircuitMetrics {
        let count = |stages: &[Stage]| {
            let work = stages.iter().flatten().filter(|g| g.is_combine()).count() as u64;
            let depth = stages.iter().filter(|s| s.iter().any(Gate::is_combine)).count() as u64;
            (depth, work)
        };
        let (depth, work) = count(&self.stages);
        let (core_depth, core_work) = count(&self.stages[..self.core_stages]);
        CircuitMetrics {
            depth,
            work,
            core_depth,
            core_work,
        }
    }

    /// Checks slot bounds and that no two gates of a stage write one slot.
    pub fn validate(&self) -> Result<()> {
        let slots = self.slots();
        for (s, stage) in self.stages.iter().enumerate() {
            let mut written = vec![false; slots];
            for g in stage {
                let dst = g.dst();
                if dst >= slots || g.src().is_some_and(|src| src >= slots) {
                    return Err(Error::InvalidPlan(format!("stage {s}: gate {g:?} out of range")));
                }
                if std::mem::replace(&mut written[dst], true) {
                    return Err(Error::InvalidPlan(format!("stage {s}: slot {dst} written twice")));
                }
            }
        }
        Ok(())
    }

    /// Removes a gate. Only useful to build deliberately broken circuits for
    /// negative tests.
    pub fn remove_gate(&mut self, stage: usize, index: usize) -> Option<Gate> {
        let stage = self.stages.get_mut(stage)?;
        (index < stage.len()).then(|| stage.remove(index))
    }

    /// One gate per line: `stage src dst kind`, with `-` as the source of
    /// identity gates, after a `#` header line.
    pub fn to_text(&self) -> String {
        let mut out = format!("# circuit {} n={} slots={}\n", self.kind, self.n, self.slots());
        for (s, g) in self.gates() {
            let src = g.src().map_or_else(|| "-".to_owned(), |v| v.to_string());
            writeln!(out, "{s} {src} {} {}", g.dst(), g.label()).expect("writing to a String");
        }
        out
    }
}

/// Evaluates `circuit` over `xs`, returning the inclusive scan. Performs
/// exactly `metrics().work` combines.
pub fn evaluate<O: ScanOp>(circuit: &Circuit, op: &O, xs: &[O::Value]) -> Result<Vec<O::Value>> {
    if xs.len() != circuit.n {
        return Err(Error::LengthMismatch {
            expected: circuit.n,
            actual: xs.len(),
        });
    }
    let mut slots: Vec<Option<O::Value>> = xs.iter().cloned().map(Some).collect();
    slots.resize(circuit.slots(), None);
    let read = |slots: &[Option<O::Value>], s: usize| -> Result<O::Value> {
        slots[s]
            .clone()
            .ok_or_else(|| Error::InvalidPlan(format!("slot {s} read before it was written")))
    };
    for stage in &circuit.stages {
        let mut writes = Vec::with_capacity(stage.len());
        for g in stage {
            let v = match *g {
                Gate::Prepend { src, dst } => op.combine(&read(&slots, src)?, &read(&slots, dst)?),
                Gate::Append { src, dst } => op.combine(&read(&slots, dst)?, &read(&slots, src)?),
                Gate::Copy { src, .. } => read(&slots, src)?,
                Gate::Identity { .. } => op.identity().ok_or(Error::MissingIdentity("identity gates"))?,
            };
            writes.push((g.dst(), v));
        }
        for (dst, v) in writes {
            slots[dst] = Some(v);
        }
    }
    slots
        .into_iter()
        .take(circuit.n)
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| Error::InvalidPlan(format!("output slot {i} never written"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{inputs, sequential_scan, Counted, Int64Add, ModularAffineOp, DEFAULT_MODULUS};

    #[test]
    fn dissemination_of_eight_uses_seventeen_combines() {
        let c = build_dissemination(8).unwrap();
        let op = Counted::new(Int64Add);
        let xs: Vec<i64> = (1..=8).collect();
        assert_eq!(evaluate(&c, &op, &xs).unwrap(), vec![1, 3, 6, 10, 15, 21, 28, 36]);
        assert_eq!(op.calls(), 17);
        assert_eq!(c.stages().len(), 3);
    }

    #[test]
    fn metrics_match_closed_forms() {
        let seq = build_sequential(100).unwrap().metrics();
        assert_eq!((seq.depth, seq.work), (99, 99));
        let dis = build_dissemination(1024).unwrap().metrics();
        assert_eq!((dis.depth, dis.work), (10, 9217));
        let ble = build_blelloch(1024).unwrap().metrics();
        assert_eq!((ble.core_depth, ble.core_work), (20, 2046));
        assert_eq!((ble.depth, ble.work), (21, 2046 + 1023));
    }

    #[test]
    fn single_slot_circuits_are_empty() {
        for kind in CircuitKind::ALL {
            let c = build(kind, 1).unwrap();
            let m = c.metrics();
            assert_eq!((m.depth, m.work), (0, 0), "{kind}");
            assert_eq!(evaluate(&c, &Int64Add, &[5]).unwrap(), vec![5]);
        }
    }

    #[test]
    fn zero_slots_is_an_error() {
        for kind in CircuitKind::ALL {
            assert!(matches!(build(kind, 0), Err(Error::ZeroSlots)));
        }
    }

    #[test]
    fn length_mismatch_is_reported() {
        let c = build_sequential(4).unwrap();
        assert!(matches!(
            evaluate(&c, &Int64Add, &[1, 2]),
            Err(Error::LengthMismatch { expected: 4, actual: 2 })
        ));
    }

    #[test]
    fn blelloch_smallest_tree() {
        let c = build_blelloch(2).unwrap();
        let m = c.metrics();
        assert_eq!((m.core_work, m.core_depth), (2, 2));
        let op = ModularAffineOp::default();
        let xs = inputs::modular_affine(2, DEFAULT_MODULUS, 1);
        assert_eq!(evaluate(&c, &op, &xs).unwrap(), vec![xs[0], op.combine(&xs[0], &xs[1])]);
    }

    #[test]
    fn blelloch_rejects_operator_without_identity() {
        struct NoIdentity;
        impl ScanOp for NoIdentity {
            type Value = i64;
            fn combine(&self, l: &i64, r: &i64) -> i64 {
                l + r
            }
            fn same(&self, a: &i64, b: &i64) -> bool {
                a == b
            }
        }
        let c = build_blelloch(4).unwrap();
        assert!(matches!(
            evaluate(&c, &NoIdentity, &[1, 2, 3, 4]),
            Err(Error::MissingIdentity(_))
        ));
        // Circuits without identity gates work fine.
        let d = build_dissemination(4).unwrap();
        assert_eq!(evaluate(&d, &NoIdentity, &[1, 2, 3, 4]).unwrap(), vec![1, 3, 6, 10]);
    }

    #[test]
    fn all_circuits_agree_with_the_oracle() {
        let op = ModularAffineOp::default();
        for n in 1..=257 {
            let xs = inputs::modular_affine(n, DEFAULT_MODULUS, n as u32);
            let expected = sequential_scan(&op, &xs).unwrap();
            for kind in CircuitKind::ALL {
                let c = build(kind, n).unwrap();
                c.validate().unwrap();
                assert_eq!(evaluate(&c, &op, &xs).unwrap(), expected, "{kind} n={n}");
            }
        }
    }

    #[test]
    fn evaluation_performs_exactly_the_counted_work() {
        let xs: Vec<i64> = (0..77).collect();
        for kind in CircuitKind::ALL {
            let c = build(kind, 77).unwrap();
            let op = Counted::new(Int64Add);
            evaluate(&c, &op, &xs).unwrap();
            assert_eq!(op.calls(), c.metrics().work, "{kind}");
        }
    }

    #[test]
    fn ladner_fischer_small_cases() {
        let two = build_ladner_fischer(2).unwrap().metrics();
        assert_eq!((two.depth, two.work), (1, 1));
        let eight = build_ladner_fischer(8).unwrap().metrics();
        assert_eq!(eight.depth, 3);
        assert!(eight.work < 27);
    }

    #[test]
    fn prefix_form_classification() {
        for kind in CircuitKind::ALL {
            let c = build(kind, 16).unwrap();
            assert_eq!(c.is_prefix_form(), kind != CircuitKind::Blelloch, "{kind}");
        }
    }

    #[test]
    fn removing_a_gate_breaks_the_scan() {
        let mut c = build_dissemination(8).unwrap();
        assert!(c.remove_gate(2, 0).is_some());
        let xs: Vec<i64> = (1..=8).collect();
        assert_ne!(
            evaluate(&c, &Int64Add, &xs).unwrap(),
            sequential_scan(&Int64Add, &xs).unwrap()
        );
        assert!(c.remove_gate(9, 0).is_none());
    }

    #[test]
    fn text_export_lists_every_gate() {
        let c = build_dissemination(4).unwrap();
        let text = c.to_text();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# circuit dissemination n=4 slots=4"));
        let gates: Vec<_> = lines.collect();
        assert_eq!(
            gates,
            [
                "0 0 1 prepend",
                "0 1 2 prepend",
                "0 2 3 prepend",
                "1 0 2 prepend",
                "1 1 3 prepend"
            ]
        );
        let b = build_blelloch(2).unwrap().to_text();
        assert!(b.contains(" - 1 identity"));
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in CircuitKind::ALL {
            assert_eq!(kind.name().parse::<CircuitKind>().unwrap(), kind);
        }
        assert_eq!("lf".parse::<CircuitKind>().unwrap(), CircuitKind::LadnerFischer);
        assert!("kogge".parse::<CircuitKind>().is_err());
    }
}
