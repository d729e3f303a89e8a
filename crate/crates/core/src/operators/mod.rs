//! Value domains, associative operators, cost models and the sequential
//! oracle scan.
//!
//! All operators share one composition convention: `combine(res, next)`
//! means "apply `next` after `res`", so an inclusive scan accumulates left
//! to right and `y[i] = x[0] ⊙ x[1] ⊙ … ⊙ x[i]`. Operators are associative
//! but in general not commutative; every algorithm in this crate keeps
//! operands in index order.

mod cost;
mod modular;
mod rigid;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

pub use cost::{sample_cost, CostModel, CostStream, CostTable, DEFAULT_SEED};
pub use modular::{mod_compose, ModularAffine, ModularAffineOp, DEFAULT_MODULUS};
pub use rigid::{compose, RigidCompose, RigidTransform2D};

use crate::{Error, Result};

/// An associative binary operation over a value domain.
pub trait ScanOp: Send + Sync {
    type Value: Clone + Send + Sync + fmt::Debug;

    /// `left ⊙ right`: `right` is applied after `left`.
    fn combine(&self, left: &Self::Value, right: &Self::Value) -> Self::Value;

    /// Neutral element, when the domain has one.
    fn identity(&self) -> Option<Self::Value> {
        None
    }

    /// Equality used when checking results against the oracle: exact for
    /// integer domains, tolerance-based for floating-point ones.
    fn same(&self, a: &Self::Value, b: &Self::Value) -> bool;
}

impl<O: ScanOp + ?Sized> ScanOp for &O {
    type Value = O::Value;

    fn combine(&self, left: &Self::Value, right: &Self::Value) -> Self::Value {
        (**self).combine(left, right)
    }

    fn identity(&self) -> Option<Self::Value> {
        (**self).identity()
    }

    fn same(&self, a: &Self::Value, b: &Self::Value) -> bool {
        (**self).same(a, b)
    }
}

/// Wrapping 64-bit integer addition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Int64Add;

impl ScanOp for Int64Add {
    type Value = i64;

    fn combine(&self, left: &i64, right: &i64) -> i64 {
        left.wrapping_add(*right)
    }

    fn identity(&self) -> Option<i64> {
        Some(0)
    }

    fn same(&self, a: &i64, b: &i64) -> bool {
        a == b
    }
}

/// Wraps an operator and counts every `combine` call.
#[derive(Debug, Default)]
pub struct Counted<O> {
    inner: O,
    calls: AtomicU64,
}

impl<O> Counted<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: ScanOp> ScanOp for Counted<O> {
    type Value = O::Value;

    fn combine(&self, left: &Self::Value, right: &Self::Value) -> Self::Value {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.combine(left, right)
    }

    fn identity(&self) -> Option<Self::Value> {
        self.inner.identity()
    }

    fn same(&self, a: &Self::Value, b: &Self::Value) -> bool {
        self.inner.same(a, b)
    }
}

/// Inclusive scan with exactly `n - 1` combines in strict left-to-right order.
pub fn sequential_scan<O: ScanOp>(op: &O, xs: &[O::Value]) -> Result<Vec<O::Value>> {
    let (first, rest) = xs.split_first().ok_or(Error::EmptyInput)?;
    let mut out = Vec::with_capacity(xs.len());
    out.push(first.clone());
    for x in rest {
        let next = op.combine(out.last().expect("non-empty"), x);
        out.push(next);
    }
    Ok(out)
}

/// Left fold of a non-empty slice; `None` for empty input.
pub fn fold<O: ScanOp>(op: &O, xs: &[O::Value]) -> Option<O::Value> {
    let (first, rest) = xs.split_first()?;
    Some(rest.iter().fold(first.clone(), |acc, x| op.combine(&acc, x)))
}

/// Index of the first position where `actual` and `expected` disagree.
pub fn first_mismatch<O: ScanOp>(op: &O, actual: &[O::Value], expected: &[O::Value]) -> Option<usize> {
    if actual.len() != expected.len() {
        return Some(actual.len().min(expected.len()));
    }
    actual.iter().zip(expected).position(|(a, b)| !op.same(a, b))
}

/// Checks `actual` against the sequential oracle over `xs`.
pub fn check_against_oracle<O: ScanOp>(op: &O, xs: &[O::Value], actual: &[O::Value]) -> Result<()> {
    let expected = sequential_scan(op, xs)?;
    match first_mismatch(op, actual, &expected) {
        Some(index) => Err(Error::OracleMismatch { index }),
        None => Ok(()),
    }
}

/// Value-domain tag used by configuration files and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    RigidTransform2D,
    ModularAffine,
    Int64Add,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::RigidTransform2D, Domain::ModularAffine, Domain::Int64Add];

    pub fn name(self) -> &'static str {
        match self {
            Domain::RigidTransform2D => "rigid",
            Domain::ModularAffine => "modular",
            Domain::Int64Add => "int64",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Domain::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown domain `{s}`")))
    }
}

/// Deterministic input generators driven by MT19937, shared by the
/// simulator, the executor and the verification suites.
pub mod inputs {
    use rand_mt::Mt;

    use super::{ModularAffine, RigidTransform2D};
    use crate::scalar::Real;

    fn unit(rng: &mut Mt) -> f64 {
        (rng.next_u32() as f64 + 0.5) / 4_294_967_296.0
    }

    pub fn modular_affine(n: usize, modulus: u64, seed: u32) -> Vec<ModularAffine> {
        let mut rng = Mt::new(seed);
        (0..n)
            .map(|_| {
                let a = 1 + (rng.next_u64() % (modulus - 1));
                let b = rng.next_u64() % modulus;
                ModularAffine::new(a, b, modulus).expect("reduced by construction")
            })
            .collect()
    }

    pub fn int64(n: usize, seed: u32) -> Vec<i64> {
        let mut rng = Mt::new(seed);
        (0..n).map(|_| (rng.next_u32() % 2001) as i64 - 1000).collect()
    }

    /// Random rigid transforms with angles in (−π, π] and translations in
    /// [−`extent`, `extent`]².
    pub fn rigid<S: Real>(n: usize, extent: f64, seed: u32) -> Vec<RigidTransform2D<S>> {
        let mut rng = Mt::new(seed);
        (0..n)
            .map(|_| {
                let angle = (2.0 * unit(&mut rng) - 1.0) * std::f64::consts::PI;
                let tx = (2.0 * unit(&mut rng) - 1.0) * extent;
                let ty = (2.0 * unit(&mut rng) - 1.0) * extent;
                RigidTransform2D::new(S::of(angle), [S::of(tx), S::of(ty)])
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_scan_of_small_sequence() {
        assert_eq!(sequential_scan(&Int64Add, &[1, 2, 3, 4]).unwrap(), vec![1, 3, 6, 10]);
    }

    #[test]
    fn sequential_scan_uses_n_minus_one_combines() {
        let op = Counted::new(Int64Add);
        let xs: Vec<i64> = (1..=8).collect();
        sequential_scan(&op, &xs).unwrap();
        assert_eq!(op.calls(), 7);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(sequential_scan(&Int64Add, &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn modular_scan_matches_reassociated_folds() {
        // Oracle: every prefix folded right-to-left, i.e. x0 ⊙ (x1 ⊙ (… ⊙ xi)).
        let op = ModularAffineOp::default();
        let xs = inputs::modular_affine(64, DEFAULT_MODULUS, 7);
        let ys = sequential_scan(&op, &xs).unwrap();
        for (i, y) in ys.iter().enumerate() {
            let mut acc = xs[i];
            for x in xs[..i].iter().rev() {
                acc = op.combine(x, &acc);
            }
            assert_eq!(*y, acc, "prefix {i}");
        }
    }

    #[test]
    fn domain_names_round_trip() {
        for d in Domain::ALL {
            assert_eq!(d.name().parse::<Domain>().unwrap(), d);
        }
        assert!("float".parse::<Domain>().is_err());
    }
}
