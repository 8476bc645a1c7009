use serde::Serialize;

use super::frequency::{freq_distance, FrequencyEnsemble};
use super::time::{GapCache, Lipschitz, TimeOptions};
use super::DistanceReport;
use crate::error::Result;
use crate::gap::{GapConfig, GapSolver};
use crate::grid::FrequencyGrid;
use crate::lti::SystemEnsemble;
use crate::par::Execution;

/// Slack on `d_freq ≤ d_time`: twice the gap tolerance plus an allowance for
/// chordal peaks that fall between gap-grid points.
pub const COMPARISON_TOLERANCE: f64 = 2e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRecord {
    pub d_freq: f64,
    pub d_time: f64,
    pub nominal_gap: f64,
    pub holds: bool,
    pub tolerance: f64,
    pub frequency: DistanceReport,
    pub time: DistanceReport,
}

/// Evaluates every sampled model of both ensembles on `grid` and compares the
/// frequency-domain distance with the gap-metric distance of the same draws.
pub fn comparison_check(
    e1: &SystemEnsemble,
    e2: &SystemEnsemble,
    grid: &FrequencyGrid,
    q: f64,
    exec: Execution,
) -> Result<ComparisonRecord> {
    let solver = GapSolver::new(GapConfig::default())?;
    comparison_check_with(&solver, e1, e2, grid, q, exec)
}

pub fn comparison_check_with(
    solver: &GapSolver,
    e1: &SystemEnsemble,
    e2: &SystemEnsemble,
    grid: &FrequencyGrid,
    q: f64,
    exec: Execution,
) -> Result<ComparisonRecord> {
    let f1 = FrequencyEnsemble::from_models(grid, e1.models(), Some(&e1.family().nominal()?))?;
    let f2 = FrequencyEnsemble::from_models(grid, e2.models(), Some(&e2.family().nominal()?))?;
    let mut frequency = freq_distance(&f1, &f2, q, exec)?;
    frequency.seed = Some(e1.seed());
    let cache = GapCache::new(solver, e1, e2, exec)?;
    let time = cache.report(
        solver,
        &TimeOptions {
            q,
            lipschitz: Lipschitz::Skip,
        },
        Some(e1.seed()),
        exec,
    )?;
    let tolerance = COMPARISON_TOLERANCE * q.max(1.0);
    Ok(ComparisonRecord {
        d_freq: frequency.value,
        d_time: time.value,
        nominal_gap: cache.nominal(),
        holds: frequency.value <= time.value + tolerance,
        tolerance,
        frequency,
        time,
    })
}
