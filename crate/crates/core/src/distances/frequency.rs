use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{BoundDetails, DistanceReport, Domain, FrequencyPoint, FREQ_SANDWICH_TOL};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::lti::{Plant, StateSpaceModel};
use crate::par::{try_map_range, Execution};
use crate::sphere::{chordal_distance, inverse_stereo, inverse_stereo_unchecked, SpherePoint};
use crate::transport::{
    max_cost_coupling, min_cost_coupling, pow_q, CostKind, CostMatrix, EmpiricalMeasure,
};

/// Sampled frequency responses of one system: `N` samples at every grid
/// frequency and optionally the nominal response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleRepr")]
pub struct FrequencyEnsemble {
    grid: FrequencyGrid,
    /// `samples[k][i]`: sample `i` at `grid[k]`.
    samples: Vec<Vec<Complex64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nominal: Option<Vec<Complex64>>,
}

#[derive(Deserialize)]
struct EnsembleRepr {
    grid: FrequencyGrid,
    samples: Vec<Vec<Complex64>>,
    #[serde(default)]
    nominal: Option<Vec<Complex64>>,
}

impl TryFrom<EnsembleRepr> for FrequencyEnsemble {
    type Error = Error;
    fn try_from(r: EnsembleRepr) -> Result<Self> {
        Self::new(r.grid, r.samples, r.nominal)
    }
}

impl FrequencyEnsemble {
    pub fn new(
        grid: FrequencyGrid,
        samples: Vec<Vec<Complex64>>,
        nominal: Option<Vec<Complex64>>,
    ) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} sample rows for {} frequencies",
                samples.len(),
                grid.len()
            )));
        }
        let n = samples[0].len();
        if n == 0 || samples.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(
                "every frequency needs the same positive number of samples".into(),
            ));
        }
        if let Some(nom) = &nominal {
            if nom.len() != grid.len() {
                return Err(Error::Dimension(
                    "nominal response length differs from the grid".into(),
                ));
            }
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !samples.iter().flatten().all(finite) || !nominal.iter().flatten().all(finite) {
            return Err(Error::InvalidArgument(
                "frequency samples must be finite".into(),
            ));
        }
        Ok(Self {
            grid,
            samples,
            nominal,
        })
    }

    /// Evaluates whole sampled systems on the grid, so that sample `i` at
    /// every frequency comes from the same plant.
    pub fn from_models<'a>(
        grid: &FrequencyGrid,
        models: impl IntoIterator<Item = &'a StateSpaceModel>,
        nominal: Option<&StateSpaceModel>,
    ) -> Result<Self> {
        let models: Vec<&StateSpaceModel> = models.into_iter().collect();
        let mut samples = vec![Vec::with_capacity(models.len()); grid.len()];
        for m in &models {
            for (k, &w) in grid.omegas().iter().enumerate() {
                samples[k].push(m.response(w)?);
            }
        }
        let nominal = nominal
            .map(|p| {
                grid.omegas()
                    .iter()
                    .map(|&w| p.response(w))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        Self::new(grid.clone(), samples, nominal)
    }

    /// Independent draws `P̄(jω) + ρ|P̄(jω)|(x + iy)` with `x, y` standard
    /// normal, fresh at every frequency. The ChaCha20 stream seeded by `seed`
    /// is consumed frequency by frequency, sample by sample, real part first.
    pub fn perturbed<P: Plant + ?Sized>(
        grid: &FrequencyGrid,
        nominal: &P,
        n: usize,
        rho: f64,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "ensemble size must be at least 1".into(),
            ));
        }
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "perturbation scale must be nonnegative, got {rho}"
            )));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut samples = Vec::with_capacity(grid.len());
        let mut nom = Vec::with_capacity(grid.len());
        for &w in grid.omegas() {
            let p = nominal.response(w)?;
            let scale = rho * p.norm();
            let row = (0..n)
                .map(|_| {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    let y: f64 = StandardNormal.sample(&mut rng);
                    p + Complex64::new(x, y) * scale
                })
                .collect();
            samples.push(row);
            nom.push(p);
        }
        Self::new(grid.clone(), samples, Some(nom))
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }
    pub fn sample_count(&self) -> usize {
        self.samples[0].len()
    }
    pub fn samples_at(&self, k: usize) -> &[Complex64] {
        &self.samples[k]
    }
    pub fn nominal(&self) -> Option<&[Complex64]> {
        self.nominal.as_deref()
    }

    fn sphere_atoms(&self, k: usize) -> Vec<SpherePoint> {
        self.samples[k]
            .iter()
            .map(|&z| inverse_stereo_unchecked(z))
            .collect()
    }
}

/// Uniform empirical measure on the projected samples at `grid[k]`.
pub fn project_ensemble(fe: &FrequencyEnsemble, k: usize) -> Result<EmpiricalMeasure<SpherePoint>> {
    if k >= fe.grid.len() {
        return Err(Error::InvalidArgument(format!(
            "frequency index {k} out of range"
        )));
    }
    let atoms = fe.samples[k]
        .iter()
        .map(|&z| inverse_stereo(z))
        .collect::<Result<Vec<_>>>()?;
    EmpiricalMeasure::uniform(atoms)
}

fn check_grids(fe1: &FrequencyEnsemble, fe2: &FrequencyEnsemble) -> Result<()> {
    if fe1.grid != fe2.grid {
        return Err(Error::InvalidArgument(
            "frequency ensembles live on different grids".into(),
        ));
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("q must be >= 1, got {q}")));
    }
    Ok(())
}

fn max_pairwise(a: &[SpherePoint], b: &[SpherePoint]) -> f64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| chordal_distance(x, y)))
        .fold(0.0, f64::max)
}

struct PointResult {
    wqq: f64,
    c_omega: f64,
    lb: Option<f64>,
}

fn analyse_frequency(
    fe1: &FrequencyEnsemble,
    fe2: &FrequencyEnsemble,
    k: usize,
    q: f64,
    with_lower: bool,
) -> Result<PointResult> {
    let (a1, a2) = (fe1.sphere_atoms(k), fe2.sphere_atoms(k));
    let cost = CostMatrix::from_fn(a1.len(), a2.len(), CostKind::Chordal, q, |i, j| {
        pow_q(chordal_distance(&a1[i], &a2[j]), q)
    })?;
    let c_omega = max_pairwise(&a1, &a2);
    let (mu, nu) = (
        EmpiricalMeasure::uniform(a1)?,
        EmpiricalMeasure::uniform(a2)?,
    );
    let wqq = min_cost_coupling(&mu, &nu, &cost)?.1;
    let lb = if with_lower {
        Some(lower_at(fe1, fe2, k, q, &mu, &nu)?)
    } else {
        None
    };
    Ok(PointResult { wqq, c_omega, lb })
}

/// `(d̄ − max_π Σ Δ_nom π)₊^q` with `Δ_nom(i,k)` the sum of the two atoms'
/// distances to their nominals.
fn lower_at(
    fe1: &FrequencyEnsemble,
    fe2: &FrequencyEnsemble,
    k: usize,
    q: f64,
    mu: &EmpiricalMeasure<SpherePoint>,
    nu: &EmpiricalMeasure<SpherePoint>,
) -> Result<f64> {
    let missing =
        || Error::InvalidArgument("lower bound needs nominal responses for both ensembles".into());
    let n1 = inverse_stereo(fe1.nominal.as_ref().ok_or_else(missing)?[k])?;
    let n2 = inverse_stereo(fe2.nominal.as_ref().ok_or_else(missing)?[k])?;
    let d_bar = chordal_distance(&n1, &n2);
    let dev1: Vec<f64> = mu
        .atoms()
        .iter()
        .map(|a| chordal_distance(a, &n1))
        .collect();
    let dev2: Vec<f64> = nu
        .atoms()
        .iter()
        .map(|a| chordal_distance(a, &n2))
        .collect();
    let delta = CostMatrix::from_fn(dev1.len(), dev2.len(), CostKind::Chordal, 1.0, |i, j| {
        dev1[i] + dev2[j]
    })?;
    let worst = max_cost_coupling(mu, nu, &delta)?.1;
    Ok(pow_q((d_bar - worst).max(0.0), q))
}

/// Worst-case-in-frequency empirical `W_q^q` with chordal ground cost, with the
/// support upper bound and, when both ensembles carry nominals, the
/// nominal-deviation lower bound. Fails if the bounds do not enclose the value.
pub fn freq_distance(
    fe1: &FrequencyEnsemble,
    fe2: &FrequencyEnsemble,
    q: f64,
    exec: Execution,
) -> Result<DistanceReport> {
    let start = Instant::now();
    check_grids(fe1, fe2)?;
    check_q(q)?;
    let with_lower = fe1.nominal.is_some() && fe2.nominal.is_some();
    let points = try_map_range(exec, fe1.grid.len(), |k| {
        analyse_frequency(fe1, fe2, k, q, with_lower)
    })?;

    let omegas = fe1.grid.omegas();
    let mut per_frequency = Vec::with_capacity(points.len());
    let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
    let (mut c_max, mut lb_max) = (0.0_f64, 0.0_f64);
    for (k, p) in points.iter().enumerate() {
        if p.wqq > best {
            best = p.wqq;
            arg = k;
        }
        c_max = c_max.max(p.c_omega);
        if let Some(lb) = p.lb {
            lb_max = lb_max.max(lb);
        }
        per_frequency.push(FrequencyPoint {
            omega: omegas[k],
            wqq: p.wqq,
            c_omega: p.c_omega,
            lb_omega: p.lb,
        });
    }
    let mut report = DistanceReport {
        domain: Domain::Frequency,
        q,
        seed: None,
        value: best,
        argmax_omega: Some(omegas[arg]),
        lower_bound: with_lower.then_some(lb_max),
        upper_bound: Some(pow_q(c_max, q)),
        sandwich_holds: true,
        bound_details: BoundDetails {
            support_sphere: Some(c_max),
            support_complex: Some(support_distance_complex(fe1, fe2)?),
            ..BoundDetails::default()
        },
        per_frequency: Some(per_frequency),
        elapsed_seconds: 0.0,
    };
    report.check_sandwich(FREQ_SANDWICH_TOL)?;
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// `max_ω max_{i,k} |s₁ − s₂|` in the complex plane.
pub fn support_distance_complex(fe1: &FrequencyEnsemble, fe2: &FrequencyEnsemble) -> Result<f64> {
    check_grids(fe1, fe2)?;
    Ok(fe1
        .samples
        .iter()
        .zip(&fe2.samples)
        .flat_map(|(a, b)| {
            a.iter()
                .flat_map(move |x| b.iter().map(move |y| (x - y).norm()))
        })
        .fold(0.0, f64::max))
}

/// `C(ω)`: largest chordal distance between projected atoms at each frequency.
pub fn c_omega_curve(
    fe1: &FrequencyEnsemble,
    fe2: &FrequencyEnsemble,
    exec: Execution,
) -> Result<Vec<f64>> {
    check_grids(fe1, fe2)?;
    try_map_range(exec, fe1.grid.len(), |k| {
        Ok(max_pairwise(&fe1.sphere_atoms(k), &fe2.sphere_atoms(k)))
    })
}

/// `max_ω C(ω)`.
pub fn support_distance_sphere(fe1: &FrequencyEnsemble, fe2: &FrequencyEnsemble) -> Result<f64> {
    Ok(c_omega_curve(fe1, fe2, Execution::Sequential)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// `max_ω C(ω)^q`.
pub fn freq_upper_bound(fe1: &FrequencyEnsemble, fe2: &FrequencyEnsemble, q: f64) -> Result<f64> {
    check_q(q)?;
    Ok(pow_q(support_distance_sphere(fe1, fe2)?, q))
}

/// `max_ω (d̄(ω) − max_π Σ Δ_nom π)₊^q`.
pub fn freq_lower_bound(fe1: &FrequencyEnsemble, fe2: &FrequencyEnsemble, q: f64) -> Result<f64> {
    check_grids(fe1, fe2)?;
    check_q(q)?;
    let mut best = 0.0_f64;
    for k in 0..fe1.grid.len() {
        let (mu, nu) = (project_ensemble(fe1, k)?, project_ensemble(fe2, k)?);
        best = best.max(lower_at(fe1, fe2, k, q, &mu, &nu)?);
    }
    Ok(best)
}
