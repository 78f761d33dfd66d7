//! Phase retrieval with quotient intensity models.
//!
//! The crate provides the measurement operators, the QIM1/QIM2/QIM3 losses
//! with their first and second derivatives, gradient descent and a
//! Wirtinger-Flow baseline, empirical landscape probes, analytic oracles for
//! the expectation formulas, and the experiment harness behind the `qimlab`
//! binary.

pub mod error;
pub mod harness;
pub mod landscape;
pub mod losses;
pub mod measurements;
pub mod oracles;
pub mod optimizers;
pub mod rng;
pub mod scalar;

pub use error::{QimError, Result};
