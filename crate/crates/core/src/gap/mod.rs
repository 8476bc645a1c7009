//! Robust-control metrics: coprime factors, H∞ norm, ν-gap, gap metric and
//! the generalized stability margin.

mod bpc;
pub mod care;
mod directed;
mod hinf;
mod nrcf;
mod nugap;

pub use bpc::{bpc, StabilityMargin};
pub use directed::{
    directed_gap, gap_metric, DirectedGap, GapConfig, GapDiagnostics, GapResult, GapSolver,
    GraphSamples,
};
pub use hinf::{hinf_norm, HinfNorm, HINF_RTOL};
pub use nrcf::{nrcf, nrcf_realization, NormalizedCoprimeFactors};
pub use nugap::{kappa, nu_gap, NuGapResult};
