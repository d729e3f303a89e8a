//! Affine maps `x ↦ a·x + b (mod m)`: an exact, non-commutative stand-in for
//! transform composition, so associativity checks can be bit-exact.

use super::ScanOp;
use crate::{Error, Result};

/// Prime modulus; products of two residues stay below 2^64.
pub const DEFAULT_MODULUS: u64 = 1_000_003;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModularAffine {
    a: u64,
    b: u64,
    m: u64,
}

impl ModularAffine {
    pub fn new(a: u64, b: u64, m: u64) -> Result<Self> {
        if m < 2 || m > u32::MAX as u64 {
            return Err(Error::InvalidConfig(format!("modulus {m} out of range")));
        }
        Ok(Self { a: a % m, b: b % m, m })
    }

    pub fn identity(m: u64) -> Self {
        Self { a: 1 % m, b: 0, m }
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn modulus(&self) -> u64 {
        self.m
    }

    pub fn apply(&self, x: u64) -> u64 {
        (self.a * (x % self.m) + self.b) % self.m
    }

    /// `next ∘ self`: apply `self`, then `next`.
    pub fn then(&self, next: &Self) -> Result<Self> {
        if self.m != next.m {
            return Err(Error::ModulusMismatch {
                left: self.m,
                right: next.m,
            });
        }
        let m = self.m;
        Ok(Self {
            a: next.a * self.a % m,
            b: (next.a * self.b + next.b) % m,
            m,
        })
    }
}

/// Composition in scan order: `mod_compose(first, second)` applies `first`
/// and then `second`.
pub fn mod_compose(first: &ModularAffine, second: &ModularAffine) -> Result<ModularAffine> {
    first.then(second)
}

/// Scan operator over [`ModularAffine`] values sharing one modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModularAffineOp {
    pub modulus: u64,
}

impl Default for ModularAffineOp {
    fn default() -> Self {
        Self {
            modulus: DEFAULT_MODULUS,
        }
    }
}

impl ScanOp for ModularAffineOp {
    type Value = ModularAffine;

    fn combine(&self, left: &ModularAffine, right: &ModularAffine) -> ModularAffine {
        left.then(right).expect("operands share the operator's modulus")
    }

    fn identity(&self) -> Option<ModularAffine> {
        Some(ModularAffine::identity(self.modulus))
    }

    fn same(&self, a: &ModularAffine, b: &ModularAffine) -> bool {
        a == b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ma(a: u64, b: u64) -> ModularAffine {
        ModularAffine::new(a, b, DEFAULT_MODULUS).unwrap()
    }

    #[test]
    fn identity_is_neutral() {
        let x = ma(17, 4);
        let id = ModularAffine::identity(DEFAULT_MODULUS);
        assert_eq!(mod_compose(&id, &x).unwrap(), x);
        assert_eq!(mod_compose(&x, &id).unwrap(), x);
    }

    #[test]
    fn composes_in_scan_order() {
        // 5·(2x + 3) + 7 = 10x + 22
        assert_eq!(mod_compose(&ma(2, 3), &ma(5, 7)).unwrap(), ma(10, 22));
        assert_eq!(ma(10, 22).apply(1), ma(5, 7).apply(ma(2, 3).apply(1)));
    }

    #[test]
    fn is_not_commutative() {
        let x = ma(2, 1);
        let y = ma(3, 0);
        assert_ne!(mod_compose(&x, &y).unwrap(), mod_compose(&y, &x).unwrap());
    }

    #[test]
    fn modulus_mismatch_is_an_error() {
        let x = ma(2, 1);
        let y = ModularAffine::new(2, 1, 101).unwrap();
        assert!(matches!(
            mod_compose(&x, &y),
            Err(Error::ModulusMismatch {
                left: DEFAULT_MODULUS,
                right: 101
            })
        ));
    }

    #[test]
    fn large_residues_do_not_overflow() {
        let m = DEFAULT_MODULUS;
        let x = ma(m - 1, m - 1);
        let y = mod_compose(&x, &x).unwrap();
        assert_eq!(y, ma(1, 0));
    }

    #[test]
    fn rejects_degenerate_modulus() {
        assert!(ModularAffine::new(1, 0, 1).is_err());
    }
}
