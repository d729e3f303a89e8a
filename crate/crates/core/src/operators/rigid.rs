//! Planar rigid transforms `φ(x) = R(α)·x + G`.

use super::ScanOp;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidTransform2D<S> {
    angle: S,
    translation: [S; 2],
}

/// Wraps an angle into (−π, π].
fn normalize_angle<S: Real>(angle: S) -> S {
    let pi = S::PI();
    let tau = pi + pi;
    let mut a = angle % tau;
    if a > pi {
        a = a - tau;
    } else if a <= -pi {
        a = a + tau;
    }
    a
}

impl<S: Real> RigidTransform2D<S> {
    pub fn new(angle: S, translation: [S; 2]) -> Self {
        Self {
            angle: normalize_angle(angle),
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            angle: S::zero(),
            translation: [S::zero(); 2],
        }
    }

    pub fn rotation(angle: S) -> Self {
        Self::new(angle, [S::zero(); 2])
    }

    pub fn angle(&self) -> S {
        self.angle
    }

    pub fn translation(&self) -> [S; 2] {
        self.translation
    }

    fn rotate(&self, p: [S; 2]) -> [S; 2] {
        let (s, c) = self.angle.sin_cos();
        [c * p[0] - s * p[1], s * p[0] + c * p[1]]
    }

    pub fn apply(&self, p: [S; 2]) -> [S; 2] {
        let r = self.rotate(p);
        [r[0] + self.translation[0], r[1] + self.translation[1]]
    }

    /// `next ∘ self`: apply `self`, then `next`.
    ///
    /// `R(β)(R(α)x + G) + H = R(α + β)x + (R(β)G + H)`.
    pub fn then(&self, next: &Self) -> Self {
        let moved = next.rotate(self.translation);
        Self::new(
            self.angle + next.angle,
            [moved[0] + next.translation[0], moved[1] + next.translation[1]],
        )
    }

    /// Largest per-component difference, with angles compared on the circle.
    pub fn max_abs_diff(&self, other: &Self) -> S {
        let dangle = normalize_angle(self.angle - other.angle).abs();
        let dx = (self.translation[0] - other.translation[0]).abs();
        let dy = (self.translation[1] - other.translation[1]).abs();
        dangle.max(dx).max(dy)
    }

    pub fn is_finite(&self) -> bool {
        self.angle.is_finite() && self.translation.iter().all(|t| t.is_finite())
    }
}

/// Composition in scan order: `compose(first, second)` applies `first` and
/// then `second`.
pub fn compose<S: Real>(first: &RigidTransform2D<S>, second: &RigidTransform2D<S>) -> RigidTransform2D<S> {
    first.then(second)
}

/// Scan operator over rigid transforms; results are compared with an
/// absolute per-component tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidCompose<S> {
    pub tolerance: S,
}

impl<S: Real> Default for RigidCompose<S> {
    fn default() -> Self {
        Self { tolerance: S::of(1e-9) }
    }
}

impl<S: Real> ScanOp for RigidCompose<S> {
    type Value = RigidTransform2D<S>;

    fn combine(&self, left: &Self::Value, right: &Self::Value) -> Self::Value {
        left.then(right)
    }

    fn identity(&self) -> Option<Self::Value> {
        Some(RigidTransform2D::identity())
    }

    fn same(&self, a: &Self::Value, b: &Self::Value) -> bool {
        a.max_abs_diff(b) <= self.tolerance
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;
    use crate::operators::inputs;

    type T = RigidTransform2D<f64>;

    #[test]
    fn identity_is_neutral() {
        let t = T::new(0.7, [3.0, -2.0]);
        assert_eq!(compose(&T::identity(), &t), t);
        assert_eq!(compose(&t, &T::identity()), t);
        assert_eq!(T::identity().apply([1.5, 2.5]), [1.5, 2.5]);
    }

    #[test]
    fn pure_rotations_add_angles() {
        let q = T::rotation(FRAC_PI_2);
        let half = compose(&q, &q);
        assert!((half.angle() - PI).abs() < 1e-15);
        assert_eq!(half.translation(), [0.0, 0.0]);
    }

    #[test]
    fn angle_stays_in_half_open_range() {
        for a in [-PI, PI, 3.0 * PI, -3.0 * PI, 7.5, -7.5] {
            let t = T::rotation(a);
            assert!(t.angle() > -PI && t.angle() <= PI, "{a} -> {}", t.angle());
        }
    }

    #[test]
    fn composition_matches_pointwise_application() {
        let xs = inputs::rigid::<f64>(2, 50.0, 3);
        let p = [4.0, -1.0];
        let lhs = compose(&xs[0], &xs[1]).apply(p);
        let rhs = xs[1].apply(xs[0].apply(p));
        assert!((lhs[0] - rhs[0]).abs() < 1e-12 && (lhs[1] - rhs[1]).abs() < 1e-12);
    }

    #[test]
    fn left_and_right_folds_agree() {
        let xs = inputs::rigid::<f64>(100, 100.0, 1410);
        let left = xs[1..].iter().fold(xs[0], |acc, x| compose(&acc, x));
        let right = xs[..99].iter().rev().fold(xs[99], |acc, x| compose(x, &acc));
        assert!(left.max_abs_diff(&right) < 1e-9);
        assert!(left.is_finite());
    }

    #[test]
    fn single_precision_composes() {
        let t = RigidTransform2D::<f32>::new(0.5, [1.0, 0.0]);
        let u = compose(&t, &RigidTransform2D::identity());
        assert!(u.max_abs_diff(&t) < 1e-6);
    }
}
