//! Dense f64 arrays with reverse-mode differentiation.
//!
//! The array type is deliberately small: row-major storage, no broadcasting
//! beyond the last axis, 64-bit everywhere. The tape records one node per
//! primitive operation; replaying it in reverse creation order visits each
//! operation exactly once and accumulates gradients additively over fan-out.
//! A finite-difference gradient checker ([`gradcheck::grad_check`]) is the
//! standing oracle for every backward formula.

pub mod adam;
pub mod array;
pub mod gradcheck;
pub mod ops;
pub mod params;
pub mod rng;
pub mod tape;

pub use adam::{adam_step, AdamConfig, AdamState, UpdateOutcome};
pub use array::Array;
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use params::{ParamGrads, ParamVars, ParameterStore};
pub use tape::{Tape, Var};
