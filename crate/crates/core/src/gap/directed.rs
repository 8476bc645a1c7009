//! Directed gap `inf_Q ‖G₁ − G₂Q‖∞` and the gap metric.
//!
//! `Q` ranges over real combinations of the Laguerre functions
//! `ψ₀ = 1`, `ψₖ = √(2a)/(s+a) · ((s−a)/(s+a))^{k−1}`, and the norm is taken
//! over a dense log-spaced grid. Because both graph symbols are inner, at each
//! frequency `‖G₁ − G₂Q‖² = |R − Q|² + κ²` with `R = G₂*G₁` and `κ` the chordal
//! distance, so the problem is a min-max of convex quadratics in the
//! coefficients. It is solved by a log-barrier Newton method on the epigraph
//! form, restricted to an active subset of the grid that grows until no grid
//! point exceeds the optimum (an exchange method).

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::nrcf::{nrcf, NormalizedCoprimeFactors};
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::lti::StateSpaceModel;

#[derive(Debug, Clone, PartialEq)]
pub struct GapConfig {
    pub grid: FrequencyGrid,
    /// Pole `a` of the Laguerre basis, rad/s.
    pub laguerre_pole: f64,
    /// Basis orders tried in turn.
    pub orders: Vec<usize>,
    /// Successive orders agreeing to within this stop the sweep.
    pub tolerance: f64,
    /// Without order convergence a value is still accepted when it lies within
    /// this distance above the chordal lower bound.
    pub bracket: f64,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            grid: FrequencyGrid::logspace(1e-3, 1e3, 2000).expect("static grid"),
            laguerre_pole: 1.0,
            orders: vec![4, 8, 16, 32],
            tolerance: 5e-4,
            bracket: 0.05,
        }
    }
}

/// Samples of the graph symbol `[D; N]` of one plant on the solver grid.
#[derive(Debug, Clone)]
pub struct GraphSamples {
    d: Vec<Complex64>,
    n: Vec<Complex64>,
}

impl GraphSamples {
    pub fn len(&self) -> usize {
        self.d.len()
    }
    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectedGap {
    pub value: f64,
    /// `max κ` on the grid, a lower bound for the value.
    pub lower: f64,
    pub order: usize,
    pub order_converged: bool,
    pub newton_iterations: usize,
    pub exchange_rounds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapDiagnostics {
    pub newton_iterations: usize,
    pub exchange_rounds: usize,
    pub order_12: usize,
    pub order_21: usize,
    /// `value − lower`, the width of the certified bracket.
    pub bracket_width: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapResult {
    pub value: f64,
    pub directed_12: f64,
    pub directed_21: f64,
    pub diagnostics: GapDiagnostics,
}

/// Grid, basis samples and settings shared by many gap evaluations.
#[derive(Debug, Clone)]
pub struct GapSolver {
    config: GapConfig,
    width: usize,
    basis_re: Vec<f64>,
    basis_im: Vec<f64>,
}

impl GapSolver {
    pub fn new(config: GapConfig) -> Result<Self> {
        if config.orders.is_empty() || config.orders.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "basis orders must be non-empty and increasing".into(),
            ));
        }
        if !(config.laguerre_pole > 0.0) {
            return Err(Error::InvalidArgument(
                "Laguerre pole must be positive".into(),
            ));
        }
        let kmax = *config.orders.last().expect("non-empty");
        let width = kmax + 1;
        let a = config.laguerre_pole;
        let m = config.grid.len();
        let mut basis_re = vec![0.0; m * width];
        let mut basis_im = vec![0.0; m * width];
        for (i, &w) in config.grid.omegas().iter().enumerate() {
            let s = Complex64::new(0.0, w);
            let all_pass = (s - a) / (s + a);
            let mut psi = (2.0 * a).sqrt() / (s + a);
            basis_re[i * width] = 1.0;
            for k in 1..width {
                basis_re[i * width + k] = psi.re;
                basis_im[i * width + k] = psi.im;
                psi *= all_pass;
            }
        }
        Ok(Self {
            config,
            width,
            basis_re,
            basis_im,
        })
    }

    pub fn config(&self) -> &GapConfig {
        &self.config
    }

    pub fn graph(&self, model: &StateSpaceModel) -> Result<GraphSamples> {
        self.graph_of(&nrcf(model)?)
    }

    pub fn graph_of(&self, f: &NormalizedCoprimeFactors) -> Result<GraphSamples> {
        let m = self.config.grid.len();
        let (mut d, mut n) = (Vec::with_capacity(m), Vec::with_capacity(m));
        for &w in self.config.grid.omegas() {
            let (dw, nw) = f.response(w)?;
            d.push(dw);
            n.push(nw);
        }
        Ok(GraphSamples { d, n })
    }

    /// `inf_Q max_ω ‖G₁ − G₂Q‖`.
    pub fn directed(&self, g1: &GraphSamples, g2: &GraphSamples) -> Result<DirectedGap> {
        let m = self.config.grid.len();
        if g1.len() != m || g2.len() != m {
            return Err(Error::Dimension(
                "graph samples were taken on a different grid".into(),
            ));
        }
        let mut r = Vec::with_capacity(m);
        let mut s = Vec::with_capacity(m);
        for i in 0..m {
            let ri = g2.d[i].conj() * g1.d[i] + g2.n[i].conj() * g1.n[i];
            let g1sq = g1.d[i].norm_sqr() + g1.n[i].norm_sqr();
            r.push(ri);
            s.push((g1sq - ri.norm_sqr()).max(0.0));
        }
        let lower = s.iter().fold(0.0_f64, |a, &b| a.max(b)).sqrt().min(1.0);
        if lower >= 1.0 - 1e-12 {
            return Ok(DirectedGap {
                value: 1.0,
                lower,
                order: 0,
                order_converged: true,
                newton_iterations: 0,
                exchange_rounds: 0,
            });
        }

        let problem = Problem {
            solver: self,
            r: &r,
            s: &s,
        };
        let mut active = initial_active(&s);
        let mut q = Vec::new();
        let mut best: Option<(f64, usize)> = None;
        let mut prev: Option<f64> = None;
        let mut converged = false;
        let (mut newton, mut rounds) = (0, 0);
        for &k in &self.config.orders {
            q.resize(k + 1, 0.0);
            let out = problem.exchange(&mut q, &mut active)?;
            newton += out.newton;
            rounds += out.rounds;
            let v = out.value_sq.sqrt();
            if best.is_none_or(|(b, _)| v < b) {
                best = Some((v, k));
            }
            if let Some(p) = prev {
                if (p - v).abs() < self.config.tolerance {
                    converged = true;
                    break;
                }
            }
            prev = Some(v);
        }
        let (value, order) = best.expect("at least one order");
        let value = value.clamp(lower, 1.0);
        if !converged && value - lower > self.config.bracket {
            return Err(Error::Numerical(format!(
                "directed gap did not settle: value {value:.6} against lower bound {lower:.6}"
            )));
        }
        Ok(DirectedGap {
            value,
            lower,
            order,
            order_converged: converged,
            newton_iterations: newton,
            exchange_rounds: rounds,
        })
    }

    /// `max(δ(P₁,P₂), δ(P₂,P₁))`.
    pub fn gap(&self, g1: &GraphSamples, g2: &GraphSamples) -> Result<GapResult> {
        let d12 = self.directed(g1, g2)?;
        let d21 = self.directed(g2, g1)?;
        let value = d12.value.max(d21.value);
        let lower = d12.lower.max(d21.lower);
        Ok(GapResult {
            value,
            directed_12: d12.value,
            directed_21: d21.value,
            diagnostics: GapDiagnostics {
                newton_iterations: d12.newton_iterations + d21.newton_iterations,
                exchange_rounds: d12.exchange_rounds + d21.exchange_rounds,
                order_12: d12.order,
                order_21: d21.order,
                bracket_width: value - lower,
                lower,
            },
        })
    }

    pub fn gap_models(&self, p1: &StateSpaceModel, p2: &StateSpaceModel) -> Result<GapResult> {
        self.gap(&self.graph(p1)?, &self.graph(p2)?)
    }
}

fn default_solver() -> &'static GapSolver {
    static SOLVER: OnceLock<GapSolver> = OnceLock::new();
    SOLVER.get_or_init(|| {
        GapSolver::new(GapConfig::default()).expect("default configuration is valid")
    })
}

/// Directed gap with the default configuration.
pub fn directed_gap(p1: &StateSpaceModel, p2: &StateSpaceModel) -> Result<f64> {
    let s = default_solver();
    Ok(s.directed(&s.graph(p1)?, &s.graph(p2)?)?.value)
}

/// Gap metric with the default configuration.
pub fn gap_metric(p1: &StateSpaceModel, p2: &StateSpaceModel) -> Result<GapResult> {
    default_solver().gap_models(p1, p2)
}

fn initial_active(s: &[f64]) -> Vec<usize> {
    let m = s.len();
    let stride = (m / 48).max(1);
    let mut idx: Vec<usize> = (0..m).step_by(stride).collect();
    idx.push(m - 1);
    idx.extend(local_maxima(s).into_iter().take(16));
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Indices of local maxima, largest first.
fn local_maxima(v: &[f64]) -> Vec<usize> {
    let m = v.len();
    let mut peaks: Vec<usize> = (0..m)
        .filter(|&i| (i == 0 || v[i] >= v[i - 1]) && (i + 1 == m || v[i] >= v[i + 1]))
        .collect();
    peaks.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    peaks
}

struct Problem<'a> {
    solver: &'a GapSolver,
    r: &'a [Complex64],
    s: &'a [f64],
}

struct ExchangeOutcome {
    value_sq: f64,
    newton: usize,
    rounds: usize,
}

const MAX_ROUNDS: usize = 40;
const ADD_PER_ROUND: usize = 12;
/// Target duality gap, in squared-norm units.
const BARRIER_GAP: f64 = 1e-9;

impl Problem<'_> {
    #[inline]
    fn residual(&self, i: usize, q: &[f64]) -> Complex64 {
        let w = self.solver.width;
        let (re, im) = (
            &self.solver.basis_re[i * w..],
            &self.solver.basis_im[i * w..],
        );
        let mut acc = self.r[i];
        for (k, &qk) in q.iter().enumerate() {
            acc.re -= re[k] * qk;
            acc.im -= im[k] * qk;
        }
        acc
    }

    #[inline]
    fn f(&self, i: usize, q: &[f64]) -> f64 {
        self.s[i] + self.residual(i, q).norm_sqr()
    }

    fn exchange(&self, q: &mut [f64], active: &mut Vec<usize>) -> Result<ExchangeOutcome> {
        let m = self.s.len();
        let mut newton = 0;
        for round in 1..=MAX_ROUNDS {
            let (_, it) = self.barrier(q, active)?;
            newton += it;
            let all: Vec<f64> = (0..m).map(|i| self.f(i, q)).collect();
            let u_active = active.iter().map(|&i| all[i]).fold(0.0, f64::max);
            let fmax = all.iter().copied().fold(0.0, f64::max);
            let slack = 1e-7 * u_active.max(1e-6);
            if fmax <= u_active + slack || round == MAX_ROUNDS {
                return Ok(ExchangeOutcome {
                    value_sq: fmax,
                    newton,
                    rounds: round,
                });
            }
            let mut added = 0;
            for i in local_maxima(&all) {
                if all[i] <= u_active + slack || added == ADD_PER_ROUND {
                    break;
                }
                if let Err(pos) = active.binary_search(&i) {
                    active.insert(pos, i);
                    added += 1;
                }
            }
            if added == 0 {
                return Ok(ExchangeOutcome {
                    value_sq: fmax,
                    newton,
                    rounds: round,
                });
            }
        }
        unreachable!("loop returns on the last round")
    }

    /// Minimizes `max_{i ∈ active} f_i(q)` in place; returns the optimum and
    /// the number of Newton steps taken.
    fn barrier(&self, q: &mut [f64], active: &[usize]) -> Result<(f64, usize)> {
        let p = q.len();
        let dim = p + 1;
        let w = self.solver.width;
        let m = active.len() as f64;
        let fmax = |q: &[f64]| active.iter().map(|&i| self.f(i, q)).fold(0.0, f64::max);

        let f0 = fmax(q);
        let mut u = f0 * 1.05 + 1e-9;
        let mut tau = m / u.max(1e-9);
        let mut steps = 0;
        let mut qt = vec![0.0; p];
        let mut grad = DVector::<f64>::zeros(dim);
        let mut hess = DMatrix::<f64>::zeros(dim, dim);
        let mut gi = vec![0.0; dim];

        loop {
            for _inner in 0..60 {
                grad.fill(0.0);
                hess.fill(0.0);
                grad[p] = tau;
                for &i in active {
                    let res = self.residual(i, q);
                    let phi = u - self.s[i] - res.norm_sqr();
                    let (re, im) = (
                        &self.solver.basis_re[i * w..i * w + p],
                        &self.solver.basis_im[i * w..i * w + p],
                    );
                    // ∇f_i = −2 Re(conj(r) Φ_i); barrier gradient (∇f_i, −1)/φ
                    for k in 0..p {
                        gi[k] = -2.0 * (res.re * re[k] + res.im * im[k]);
                    }
                    gi[p] = -1.0;
                    let inv = 1.0 / phi;
                    let inv2 = inv * inv;
                    for a in 0..dim {
                        grad[a] += gi[a] * inv;
                        let ga = gi[a] * inv2;
                        for b in a..dim {
                            hess[(a, b)] += ga * gi[b];
                        }
                    }
                    let c = 2.0 * inv;
                    for a in 0..p {
                        let (ra, ia) = (re[a] * c, im[a] * c);
                        for b in a..p {
                            hess[(a, b)] += ra * re[b] + ia * im[b];
                        }
                    }
                }
                for a in 0..dim {
                    for b in 0..a {
                        hess[(a, b)] = hess[(b, a)];
                    }
                }
                let reg = 1e-14 * (0..dim).map(|a| hess[(a, a)]).fold(0.0, f64::max);
                for a in 0..dim {
                    hess[(a, a)] += reg;
                }
                let chol = hess.clone().cholesky().ok_or_else(|| {
                    Error::Numerical("barrier Hessian lost positive definiteness".into())
                })?;
                let step = chol.solve(&(-&grad));
                let decrement = -grad.dot(&step);
                steps += 1;
                if decrement / 2.0 <= 1e-10 {
                    break;
                }

                // backtracking: stay strictly inside, then sufficient decrease
                let objective = |q: &[f64], u: f64| -> Option<f64> {
                    let mut acc = tau * u;
                    for &i in active {
                        let phi = u - self.f(i, q);
                        if phi <= 0.0 {
                            return None;
                        }
                        acc -= phi.ln();
                    }
                    Some(acc)
                };
                let base = objective(q, u).expect("current point is interior");
                let mut t = 1.0;
                loop {
                    for k in 0..p {
                        qt[k] = q[k] + t * step[k];
                    }
                    let ut = u + t * step[p];
                    if let Some(v) = objective(&qt, ut) {
                        if v <= base - 0.01 * t * decrement {
                            q.copy_from_slice(&qt);
                            u = ut;
                            break;
                        }
                    }
                    t *= 0.5;
                    if t < 1e-12 {
                        break;
                    }
                }
                if t < 1e-12 {
                    break;
                }
            }
            if m / tau <= BARRIER_GAP {
                return Ok((fmax(q), steps));
            }
            tau *= 12.0;
        }
    }
}
