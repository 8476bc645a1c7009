//! Exact discrete optimal transport between weighted empirical measures.
//!
//! Equal-size uniform measures go through the assignment solver (an optimal
//! vertex of the Birkhoff polytope is a permutation); everything else through
//! the transportation simplex. Zero-weight atoms are dropped before solving
//! and reinserted as empty rows/columns of the plan.

mod hungarian;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Atoms with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<T> {
    atoms: Vec<T>,
    weights: Vec<f64>,
}

impl<T> EmpiricalMeasure<T> {
    pub fn new(atoms: Vec<T>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument(
                "empirical measure needs at least one atom".into(),
            ));
        }
        if atoms.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms, weights })
    }

    /// Weight `1/N` on every atom.
    pub fn uniform(atoms: Vec<T>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    pub fn atoms(&self) -> &[T] {
        &self.atoms
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn len(&self) -> usize {
        self.atoms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    fn is_uniform(&self) -> bool {
        let w = 1.0 / self.len() as f64;
        self.weights.iter().all(|x| (x - w).abs() <= 1e-15)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Chordal,
    Gap,
    Custom,
}

/// Nonnegative `rows × cols` ground-cost matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    kind: CostKind,
    q: f64,
}

impl CostMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        entries: Vec<f64>,
        kind: CostKind,
        q: f64,
    ) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} cost",
                entries.len()
            )));
        }
        if entries.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument(
                "costs must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            entries,
            kind,
            q,
        })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        kind: CostKind,
        q: f64,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let entries = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Self::new(rows, cols, entries, kind, q)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn kind(&self) -> CostKind {
        self.kind
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }
    pub fn min(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Joint distribution with prescribed marginals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPlan {
    rows: usize,
    cols: usize,
    pi: Vec<f64>,
}

impl CouplingPlan {
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pi[i * self.cols + j]
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    /// Largest marginal violation (or `inf` when some entry is negative).
    pub fn marginal_error(&self, row_weights: &[f64], col_weights: &[f64]) -> f64 {
        if self.pi.iter().any(|x| *x < 0.0) {
            return f64::INFINITY;
        }
        let mut err = 0.0_f64;
        for (i, w) in row_weights.iter().enumerate() {
            let s: f64 = self.pi[i * self.cols..(i + 1) * self.cols].iter().sum();
            err = err.max((s - w).abs());
        }
        for (j, w) in col_weights.iter().enumerate() {
            let s: f64 = (0..self.rows).map(|i| self.pi[i * self.cols + j]).sum();
            err = err.max((s - w).abs());
        }
        err
    }

    /// `Σ cost(i, j) π(i, j)`.
    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        self.pi.iter().zip(cost.entries()).map(|(p, c)| p * c).sum()
    }
}

/// Optimal coupling minimizing the expected cost, with its value.
pub fn min_cost_coupling<T, U>(
    mu: &EmpiricalMeasure<T>,
    nu: &EmpiricalMeasure<U>,
    cost: &CostMatrix,
) -> Result<(CouplingPlan, f64)> {
    check_shapes(mu, nu, cost)?;
    solve(mu, nu, cost.entries(), false)
}

/// Coupling maximizing the expected cost (minimum of the negated costs).
pub fn max_cost_coupling<T, U>(
    mu: &EmpiricalMeasure<T>,
    nu: &EmpiricalMeasure<U>,
    cost: &CostMatrix,
) -> Result<(CouplingPlan, f64)> {
    check_shapes(mu, nu, cost)?;
    solve(mu, nu, cost.entries(), true)
}

/// `W_q^q(mu, nu)` for the ground metric `metric`: the optimal expected
/// `metric^q`, without the final `1/q` root.
pub fn wasserstein_q<T, U, F>(
    mu: &EmpiricalMeasure<T>,
    nu: &EmpiricalMeasure<U>,
    metric: F,
    q: f64,
) -> Result<f64>
where
    F: Fn(&T, &U) -> f64,
{
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("q must be >= 1, got {q}")));
    }
    let cost = CostMatrix::from_fn(mu.len(), nu.len(), CostKind::Custom, q, |i, k| {
        pow_q(metric(&mu.atoms[i], &nu.atoms[k]), q)
    })?;
    Ok(min_cost_coupling(mu, nu, &cost)?.1)
}

/// `x^q`, exact for `q = 1`.
#[inline]
pub fn pow_q(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        x
    } else {
        x.powf(q)
    }
}

fn check_shapes<T, U>(
    mu: &EmpiricalMeasure<T>,
    nu: &EmpiricalMeasure<U>,
    cost: &CostMatrix,
) -> Result<()> {
    if cost.rows() != mu.len() || cost.cols() != nu.len() {
        return Err(Error::Dimension(format!(
            "cost is {}x{}, measures have {} and {} atoms",
            cost.rows(),
            cost.cols(),
            mu.len(),
            nu.len()
        )));
    }
    Ok(())
}

fn solve<T, U>(
    mu: &EmpiricalMeasure<T>,
    nu: &EmpiricalMeasure<U>,
    cost: &[f64],
    maximize: bool,
) -> Result<(CouplingPlan, f64)> {
    let (rows, cols) = (mu.len(), nu.len());
    let sign = if maximize { -1.0 } else { 1.0 };

    if rows == cols && mu.is_uniform() && nu.is_uniform() {
        let signed: Vec<f64> = cost.iter().map(|c| sign * c).collect();
        let assign = hungarian::solve(rows, &signed);
        let w = 1.0 / rows as f64;
        let mut pi = vec![0.0; rows * cols];
        let mut value = 0.0;
        for (i, &j) in assign.iter().enumerate() {
            pi[i * cols + j] = w;
            value += cost[i * cols + j];
        }
        return Ok((CouplingPlan { rows, cols, pi }, value * w));
    }

    let keep_r: Vec<usize> = (0..rows).filter(|&i| mu.weights[i] > 0.0).collect();
    let keep_c: Vec<usize> = (0..cols).filter(|&j| nu.weights[j] > 0.0).collect();
    let supply: Vec<f64> = keep_r.iter().map(|&i| mu.weights[i]).collect();
    let demand: Vec<f64> = keep_c.iter().map(|&j| nu.weights[j]).collect();
    let sub: Vec<f64> = keep_r
        .iter()
        .flat_map(|&i| keep_c.iter().map(move |&j| sign * cost[i * cols + j]))
        .collect();
    let flow = simplex::solve(&supply, &demand, &sub)?;
    let mut pi = vec![0.0; rows * cols];
    let mut value = 0.0;
    for (a, &i) in keep_r.iter().enumerate() {
        for (b, &j) in keep_c.iter().enumerate() {
            let x = flow[a * keep_c.len() + b];
            pi[i * cols + j] = x;
            value += x * cost[i * cols + j];
        }
    }
    Ok((CouplingPlan { rows, cols, pi }, value))
}
