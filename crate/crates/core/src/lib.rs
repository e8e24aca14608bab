//! Multi-objective miniaturization of configurable interpreters.
//!
//! The crate models an interpreter's optional features as a bit-vector,
//! measures candidate builds through a pluggable evaluator, and searches for
//! Pareto-optimal feature selections that trade code size, memory, run time
//! and device preference against each other.

pub mod device;
pub mod error;
pub mod evaluation;
pub mod feature_model;
pub mod indicators;
pub mod search;

pub use error::{Error, EvaluatorError, Result};
