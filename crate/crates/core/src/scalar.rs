//! Floating-point scalar abstraction for the rigid-transform domain.

use std::fmt::Debug;

use num_traits::{Float, FloatConst};

/// Real scalar usable for transform arithmetic: `f32` or `f64`.
pub trait Real: Float + FloatConst + Debug + Default + Send + Sync + 'static {
    /// Converts from `f64`, rounding for narrower types.
    fn of(x: f64) -> Self;

    fn to_f64(self) -> f64;
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }

    fn to_f64(self) -> f64 {
        self
    }
}
