//! Distances between stochastic SISO LTI systems.
//!
//! * frequency domain: the worst-case-in-frequency type-q Wasserstein distance
//!   between sampled frequency responses projected onto the Riemann sphere,
//!   with chordal ground cost;
//! * time domain: the type-q Wasserstein distance between ensembles of
//!   perturbed plants with the gap metric as ground cost;
//!
//! together with their upper and lower bounds and the check that the first
//! never exceeds the second.

// `!(x < 0.0)` is deliberate throughout: NaN must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distances;
pub mod error;
pub mod gap;
pub mod grid;
pub mod io;
pub mod lti;
pub mod par;
mod schur;
pub mod sphere;
pub mod transport;

pub use error::{Error, Result};
pub use par::Execution;
