//! Receding-horizon LQ control with inexact models.
//!
//! The crate computes Riccati iterates and closed-loop performance for linear
//! plants under quadratic cost, evaluates performance-gap bounds for the
//! receding-horizon controller designed on an estimated model, estimates
//! models by least squares and runs an adaptive certainty-equivalence loop.

pub mod adaptive;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod performance;
pub mod riccati;
pub mod rng;
pub mod sysid;

pub use error::{Error, Result};
pub use model::{Assumptions, CostSpec, LinearSystem, RhcConfig};
pub use riccati::{OptimalSolution, RiccatiSolution};
