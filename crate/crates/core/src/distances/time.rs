use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use super::{BoundDetails, DistanceReport, Domain};
use crate::error::{Error, Result};
use crate::gap::{GapConfig, GapSolver, GraphSamples};
use crate::lti::SystemEnsemble;
use crate::par::{try_map_range, Execution};
use crate::transport::{min_cost_coupling, pow_q, CostKind, CostMatrix, EmpiricalMeasure};

/// How the Lipschitz constants of the moment bound are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Lipschitz {
    /// Do not compute the moment bound.
    Skip,
    /// Largest observed ratio `δ_g(Σ(θ), Σ(θ′)) / ‖θ − θ′‖` within each
    /// ensemble, nominal parameter included.
    Estimate,
    Given([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeOptions {
    pub q: f64,
    pub lipschitz: Lipschitz,
}

impl Default for TimeOptions {
    fn default() -> Self {
        Self {
            q: 1.0,
            lipschitz: Lipschitz::Skip,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentBound {
    pub lipschitz: [f64; 2],
    pub lipschitz_estimated: bool,
    /// `(E‖θᵢ − θ̄ᵢ‖^q)^{1/q}` from the draws.
    pub moments: [f64; 2],
    /// `(nominal + L₁m₁ + L₂m₂)^q`; may exceed 1.
    pub raw: f64,
    pub clamped: f64,
}

/// Graph samples and gaps computed once per ensemble pair.
#[derive(Debug, Clone)]
pub struct GapCache {
    n1: usize,
    n2: usize,
    cross: Vec<f64>,
    nominal: f64,
    to_nominal: [Vec<f64>; 2],
    graphs: [Vec<GraphSamples>; 2],
    nominal_graphs: [GraphSamples; 2],
    thetas: [Vec<DVector<f64>>; 2],
    nominal_thetas: [DVector<f64>; 2],
    tolerance: f64,
}

fn pair_err(i: usize, k: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Pair {
        i,
        k,
        source: Box::new(e),
    }
}

impl GapCache {
    /// All `N₁·N₂` cross gaps, the nominal gap and the gaps from each nominal to
    /// its own draws.
    pub fn new(
        solver: &GapSolver,
        e1: &SystemEnsemble,
        e2: &SystemEnsemble,
        exec: Execution,
    ) -> Result<Self> {
        let graphs_of = |e: &SystemEnsemble| -> Result<Vec<GraphSamples>> {
            let models: Vec<_> = e.models().collect();
            try_map_range(exec, models.len(), |i| solver.graph(models[i]))
        };
        let g1 = graphs_of(e1)?;
        let g2 = graphs_of(e2)?;
        let nom1 = solver.graph(&e1.family().nominal()?)?;
        let nom2 = solver.graph(&e2.family().nominal()?)?;
        let (n1, n2) = (g1.len(), g2.len());

        let cross = try_map_range(exec, n1 * n2, |idx| {
            let (i, k) = (idx / n2, idx % n2);
            solver
                .gap(&g1[i], &g2[k])
                .map(|r| r.value)
                .map_err(pair_err(i, k))
        })?;
        let nominal = solver.gap(&nom1, &nom2)?.value;
        let to_nom = |nom: &GraphSamples, gs: &[GraphSamples]| -> Result<Vec<f64>> {
            try_map_range(exec, gs.len(), |i| solver.gap(nom, &gs[i]).map(|r| r.value))
        };
        let to_nominal = [to_nom(&nom1, &g1)?, to_nom(&nom2, &g2)?];
        let thetas = [
            e1.samples().iter().map(|s| s.theta.clone()).collect(),
            e2.samples().iter().map(|s| s.theta.clone()).collect(),
        ];
        Ok(Self {
            n1,
            n2,
            cross,
            nominal,
            to_nominal,
            graphs: [g1, g2],
            nominal_graphs: [nom1, nom2],
            thetas,
            nominal_thetas: [
                e1.family().nominal_theta().clone(),
                e2.family().nominal_theta().clone(),
            ],
            tolerance: solver.config().tolerance,
        })
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }
    pub fn cross(&self, i: usize, k: usize) -> f64 {
        self.cross[i * self.n2 + k]
    }
    pub fn nominal(&self) -> f64 {
        self.nominal
    }
    /// Gaps from nominal `which` (0 or 1) to each of its draws.
    pub fn to_nominal(&self, which: usize) -> &[f64] {
        &self.to_nominal[which]
    }

    /// Optimal expected `δ_g^q` over couplings of the uniform ensembles.
    pub fn distance(&self, q: f64) -> Result<f64> {
        let cost = CostMatrix::new(
            self.n1,
            self.n2,
            self.cross.iter().map(|g| pow_q(*g, q)).collect(),
            CostKind::Gap,
            q,
        )?;
        let mu = EmpiricalMeasure::uniform(vec![(); self.n1])?;
        let nu = EmpiricalMeasure::uniform(vec![(); self.n2])?;
        Ok(min_cost_coupling(&mu, &nu, &cost)?.1)
    }

    pub fn diameter(&self) -> f64 {
        self.cross.iter().copied().fold(0.0, f64::max)
    }

    pub fn expected_nominal_gaps(&self) -> [f64; 2] {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        [mean(&self.to_nominal[0]), mean(&self.to_nominal[1])]
    }

    /// `(nominal − E[Gap₁] − E[Gap₂])₊^q`.
    pub fn lower_bound(&self, q: f64) -> f64 {
        let [a, b] = self.expected_nominal_gaps();
        pow_q((self.nominal - a - b).max(0.0), q)
    }

    /// Empirical Lipschitz constants of `θ ↦ Σᵢ(θ)` in the gap metric.
    pub fn lipschitz(&self, solver: &GapSolver, exec: Execution) -> Result<[f64; 2]> {
        let mut out = [0.0; 2];
        for (w, slot) in out.iter_mut().enumerate() {
            let mut nodes: Vec<(&DVector<f64>, &GraphSamples)> =
                vec![(&self.nominal_thetas[w], &self.nominal_graphs[w])];
            nodes.extend(self.thetas[w].iter().zip(&self.graphs[w]));
            let m = nodes.len();
            let pairs: Vec<(usize, usize)> = (0..m)
                .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
                .collect();
            let ratios = try_map_range(exec, pairs.len(), |p| {
                let (a, b) = pairs[p];
                let dist = (nodes[a].0 - nodes[b].0).norm();
                if dist <= 1e-12 {
                    return Ok(0.0);
                }
                Ok(solver.gap(nodes[a].1, nodes[b].1)?.value / dist)
            })?;
            *slot = ratios.into_iter().fold(0.0, f64::max);
        }
        Ok(out)
    }

    /// `(nominal + Σ Lᵢ (E‖θᵢ − θ̄ᵢ‖^q)^{1/q})^q`.
    pub fn moment_bound(&self, q: f64, lipschitz: [f64; 2], estimated: bool) -> MomentBound {
        let moment = |w: usize| {
            let th = &self.thetas[w];
            let mean = th
                .iter()
                .map(|t| pow_q((t - &self.nominal_thetas[w]).norm(), q))
                .sum::<f64>()
                / th.len() as f64;
            mean.powf(1.0 / q)
        };
        let moments = [moment(0), moment(1)];
        let raw = pow_q(
            self.nominal + lipschitz[0] * moments[0] + lipschitz[1] * moments[1],
            q,
        );
        MomentBound {
            lipschitz,
            lipschitz_estimated: estimated,
            moments,
            raw,
            clamped: raw.min(1.0),
        }
    }

    /// Slack for comparisons between quantities built from computed gaps.
    pub fn slack(&self, q: f64) -> f64 {
        2.0 * self.tolerance * q.max(1.0)
    }

    /// Full report from the cached gaps.
    pub fn report(
        &self,
        solver: &GapSolver,
        opts: &TimeOptions,
        seed: Option<u64>,
        exec: Execution,
    ) -> Result<DistanceReport> {
        let q = opts.q;
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::InvalidArgument(format!("q must be >= 1, got {q}")));
        }
        let moment = match opts.lipschitz {
            Lipschitz::Skip => None,
            Lipschitz::Estimate => Some(self.moment_bound(q, self.lipschitz(solver, exec)?, true)),
            Lipschitz::Given(l) => {
                if l.iter().any(|x| !(*x >= 0.0)) {
                    return Err(Error::InvalidArgument(
                        "Lipschitz constants must be nonnegative".into(),
                    ));
                }
                Some(self.moment_bound(q, l, false))
            }
        };
        let mut report = DistanceReport {
            domain: Domain::Time,
            q,
            seed,
            value: self.distance(q)?,
            argmax_omega: None,
            lower_bound: Some(self.lower_bound(q)),
            upper_bound: Some(pow_q(self.diameter(), q)),
            sandwich_holds: true,
            bound_details: BoundDetails {
                nominal_distance: Some(self.nominal),
                diameter: Some(self.diameter()),
                expected_nominal_gap: Some(self.expected_nominal_gaps()),
                moment,
                ..BoundDetails::default()
            },
            per_frequency: None,
            elapsed_seconds: 0.0,
        };
        report.check_sandwich(self.slack(q))?;
        Ok(report)
    }
}

fn default_solver() -> Result<GapSolver> {
    GapSolver::new(GapConfig::default())
}

/// Gap-metric Wasserstein distance between two ensembles with both bounds.
pub fn time_distance(
    e1: &SystemEnsemble,
    e2: &SystemEnsemble,
    opts: &TimeOptions,
    exec: Execution,
) -> Result<DistanceReport> {
    let start = Instant::now();
    let solver = default_solver()?;
    let cache = GapCache::new(&solver, e1, e2, exec)?;
    let mut r = cache.report(&solver, opts, Some(e1.seed()), exec)?;
    r.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(r)
}

/// Gap between the two nominal models.
pub fn nominal_distance(e1: &SystemEnsemble, e2: &SystemEnsemble) -> Result<f64> {
    Ok(crate::gap::gap_metric(&e1.family().nominal()?, &e2.family().nominal()?)?.value)
}

/// `(max_{i,k} δ_g)^q`.
pub fn time_upper_bound_diameter(cache: &GapCache, q: f64) -> f64 {
    pow_q(cache.diameter(), q)
}

/// `(nominal − E[Gap₁] − E[Gap₂])₊^q`.
pub fn time_lower_bound(cache: &GapCache, q: f64) -> f64 {
    cache.lower_bound(q)
}

/// Moment bound with supplied Lipschitz constants.
pub fn time_upper_bound_moment(cache: &GapCache, q: f64, l1: f64, l2: f64) -> MomentBound {
    cache.moment_bound(q, [l1, l2], false)
}

/// Empirical Lipschitz constants for both ensembles.
pub fn estimate_lipschitz(
    cache: &GapCache,
    solver: &GapSolver,
    exec: Execution,
) -> Result<[f64; 2]> {
    cache.lipschitz(solver, exec)
}
