//! Prefix scans for expensive, imbalanced, associative and non-commutative
//! operators.
//!
//! The crate provides
//!
//! * [`operators`]: value domains (rigid transforms, modular affine maps,
//!   integers), deterministic cost models and the sequential oracle scan;
//! * [`circuits`]: Sequential, Blelloch, dissemination, Ladner–Fischer and
//!   binomial-tree scan circuits with exact depth and work accounting;
//! * [`distributed`]: scan-then-map and reduce-then-scan strategies, the
//!   hierarchical ranks × lanes decomposition and closed-form predictors;
//! * [`stealing`]: the work-stealing reduce phase with flexible, neighbour
//!   to neighbour segment boundaries;
//! * [`sim`]: a deterministic discrete-event backend producing traces;
//! * [`exec`]: a real multi-threaded backend.
//!
//! Composition convention: `combine(a, b)` applies `a` first and `b` second,
//! and scans accumulate left to right.

pub mod circuits;
pub mod distributed;
pub mod exec;
pub mod operators;
pub mod scalar;
pub mod sim;
pub mod stealing;

mod error;

pub use error::{Error, Result};

/// Durations, in nanoseconds of virtual or wall-clock time.
pub type Nanos = u64;

pub type RigidTransform = operators::RigidTransform2D<f64>;
pub type RigidTransformF32 = operators::RigidTransform2D<f32>;
pub type RigidCompose = operators::RigidCompose<f64>;
pub type RigidComposeF32 = operators::RigidCompose<f32>;
