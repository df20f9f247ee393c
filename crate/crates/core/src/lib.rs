//! Learning thermodynamically consistent dynamics from observable data.
//!
//! The crate covers the full pipeline: exact automatic differentiation
//! ([`autodiff`]), neural parametrisations with built-in dissipativity
//! ([`nets`]), structure-preserving implicit integrators ([`integrators`]),
//! benchmark systems with reference solvers ([`systems`]), and training
//! ([`training`]).

pub mod autodiff;
pub mod error;
pub mod integrators;
pub mod nets;
pub mod parallel;
pub mod state;
pub mod systems;
pub mod training;

pub use error::{Error, Result};
