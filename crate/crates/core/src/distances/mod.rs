//! Distances between stochastic systems and their bounds.
//!
//! The frequency-domain distance is the worst case over a frequency grid of the
//! type-q Wasserstein cost between the sampled responses projected onto the
//! Riemann sphere. The time-domain distance is the type-q Wasserstein cost
//! between plant ensembles with the gap metric as ground cost.

mod compare;
mod frequency;
mod time;

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::fmt_f64;

pub use compare::{
    comparison_check, comparison_check_with, ComparisonRecord, COMPARISON_TOLERANCE,
};
pub use frequency::{
    c_omega_curve, freq_distance, freq_lower_bound, freq_upper_bound, project_ensemble,
    support_distance_complex, support_distance_sphere, FrequencyEnsemble,
};
pub use time::{
    estimate_lipschitz, nominal_distance, time_distance, time_lower_bound,
    time_upper_bound_diameter, time_upper_bound_moment, GapCache, Lipschitz, MomentBound,
    TimeOptions,
};

/// Slack allowed when checking a frequency-domain sandwich; all three numbers
/// come from the same atoms, so only rounding separates them.
pub const FREQ_SANDWICH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Frequency,
    Time,
}

/// One row of the per-frequency curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyPoint {
    pub omega: f64,
    /// Empirical `W_q^q` at this frequency.
    pub wqq: f64,
    /// Largest chordal distance between atoms of the two projected ensembles.
    pub c_omega: f64,
    /// Per-frequency lower bound `(d̄ − max-coupling deviation)₊^q`.
    pub lb_omega: Option<f64>,
}

/// Bound ingredients; fields not produced by a computation stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundDetails {
    /// `max_ω C(ω)`.
    pub support_sphere: Option<f64>,
    pub support_complex: Option<f64>,
    /// Gap between the nominal models.
    pub nominal_distance: Option<f64>,
    /// Largest gap between a member of each ensemble.
    pub diameter: Option<f64>,
    /// Mean gap from each nominal to its own ensemble.
    pub expected_nominal_gap: Option<[f64; 2]>,
    pub moment: Option<MomentBound>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub domain: Domain,
    pub q: f64,
    pub seed: Option<u64>,
    pub value: f64,
    pub argmax_omega: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    /// Whether `lower ≤ value ≤ upper` held within the allowed slack.
    pub sandwich_holds: bool,
    pub bound_details: BoundDetails,
    pub per_frequency: Option<Vec<FrequencyPoint>>,
    /// Wall-clock seconds; kept out of the serialized form so that reports are
    /// reproducible byte for byte.
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

impl DistanceReport {
    fn check_sandwich(&mut self, tol: f64) -> Result<()> {
        let lo_ok = self.lower_bound.is_none_or(|lb| lb <= self.value + tol);
        let hi_ok = self.upper_bound.is_none_or(|ub| self.value <= ub + tol);
        self.sandwich_holds = lo_ok && hi_ok;
        if !self.sandwich_holds {
            return Err(Error::Numerical(format!(
                "bound sandwich violated: lower {:?}, value {}, upper {:?}",
                self.lower_bound, self.value, self.upper_bound
            )));
        }
        Ok(())
    }

    /// `omega,wqq,c_omega,lb_omega` rows, 17 significant digits, LF endings.
    /// Frequency-domain reports only.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let rows = self.per_frequency.as_deref().unwrap_or(&[]);
        writeln!(w, "omega,wqq,c_omega,lb_omega")?;
        for p in rows {
            let lb = p.lb_omega.map(fmt_f64).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(p.omega),
                fmt_f64(p.wqq),
                fmt_f64(p.c_omega),
                lb
            )?;
        }
        Ok(())
    }

    /// `d=<v> lb=<v> ub=<v>`.
    pub fn summary_line(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), |v| format!("{v:.4}"));
        format!(
            "d={:.4} lb={} ub={}",
            self.value,
            opt(self.lower_bound),
            opt(self.upper_bound)
        )
    }
}
