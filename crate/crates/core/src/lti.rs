//! SISO LTI plants in state-space and rational form, affine Gaussian
//! perturbation families and seeded ensembles drawn from them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schur::complex_schur;

/// Relative pivot size below which `jωI - A` is treated as singular.
const AXIS_POLE_TOL: f64 = 1e-12;

/// Continuous-time SISO state-space model `(A, B, C, D)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: f64,
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: f64) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::Dimension(
                "state dimension must be at least 1".into(),
            ));
        }
        if a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A is {}x{}, expected square",
                n,
                a.ncols()
            )));
        }
        if b.shape() != (n, 1) {
            return Err(Error::Dimension(format!(
                "B is {:?}, expected ({n}, 1)",
                b.shape()
            )));
        }
        if c.shape() != (1, n) {
            return Err(Error::Dimension(format!(
                "C is {:?}, expected (1, {n})",
                c.shape()
            )));
        }
        let finite = a
            .iter()
            .chain(b.iter())
            .chain(c.iter())
            .all(|x| x.is_finite());
        if !finite || !d.is_finite() {
            return Err(Error::InvalidArgument(
                "model entries must be finite".into(),
            ));
        }
        Ok(Self { a, b, c, d })
    }

    /// Builds a model from row-major slices; convenient for literals in tests.
    pub fn from_rows(a: &[&[f64]], b: &[f64], c: &[f64], d: f64) -> Result<Self> {
        let n = a.len();
        let a = DMatrix::from_fn(n, a.first().map_or(0, |r| r.len()), |i, j| a[i][j]);
        Self::new(
            a,
            DMatrix::from_column_slice(b.len(), 1, b),
            DMatrix::from_row_slice(1, c.len(), c),
            d,
        )
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> f64 {
        self.d
    }

    /// Eigenvalues of `A`.
    pub fn poles(&self) -> Vec<Complex64> {
        eigenvalues(&self.a)
    }

    pub fn realization(&self) -> Realization {
        Realization {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            d: DMatrix::from_element(1, 1, self.d),
        }
    }

    /// `P(jω) = C (jωI - A)^{-1} B + D`.
    pub fn frequency_response(&self, omega: f64) -> Result<Complex64> {
        let n = self.order();
        let mut m = self.a.map(|x| Complex64::new(-x, 0.0));
        for i in 0..n {
            m[(i, i)] += Complex64::new(0.0, omega);
        }
        let rhs = self.b.map(|x| Complex64::new(x, 0.0));
        let x = solve_complex(m, rhs).ok_or(Error::PoleOnAxis { omega })?;
        let y = (0..n).fold(Complex64::new(self.d, 0.0), |acc, i| {
            acc + x[(i, 0)] * self.c[(0, i)]
        });
        Ok(y)
    }
}

/// Generic (possibly MIMO, possibly zero-order) realization used internally by
/// the norm and factorization routines.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl Realization {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.d.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.d.nrows()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        eigenvalues(&self.a)
    }

    /// All poles strictly inside the open left half-plane.
    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.re < 0.0)
    }

    /// Transfer matrix at `s = jω`.
    pub fn response(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let n = self.order();
        let d = self.d.map(|x| Complex64::new(x, 0.0));
        if n == 0 {
            return Ok(d);
        }
        let mut m = self.a.map(|x| Complex64::new(-x, 0.0));
        for i in 0..n {
            m[(i, i)] += Complex64::new(0.0, omega);
        }
        let x = solve_complex(m, self.b.map(|x| Complex64::new(x, 0.0)))
            .ok_or(Error::PoleOnAxis { omega })?;
        Ok(self.c.map(|x| Complex64::new(x, 0.0)) * x + d)
    }
}

/// Proper rational transfer function, coefficients in ascending powers of `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RationalRepr")]
pub struct RationalTransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

#[derive(Deserialize)]
struct RationalRepr {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<RationalRepr> for RationalTransferFunction {
    type Error = Error;
    fn try_from(r: RationalRepr) -> Result<Self> {
        Self::new(r.num, r.den)
    }
}

impl RationalTransferFunction {
    /// Validates properness and rejects poles on the imaginary axis.
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        let tf = Self::new_unchecked_axis(num, den)?;
        for p in tf.poles() {
            if p.re.abs() <= 1e-10 * (1.0 + p.norm()) {
                return Err(Error::PoleOnAxis { omega: p.im });
            }
        }
        Ok(tf)
    }

    /// Structural checks only; imaginary-axis poles are allowed.
    pub(crate) fn new_unchecked_axis(mut num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if den.is_empty() || *den.last().unwrap() == 0.0 {
            return Err(Error::InvalidArgument(
                "denominator leading coefficient must be nonzero".into(),
            ));
        }
        if num.iter().chain(den.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("coefficients must be finite".into()));
        }
        while num.len() > 1 && *num.last().unwrap() == 0.0 {
            num.pop();
        }
        if num.is_empty() {
            num.push(0.0);
        }
        if num.len() > den.len() {
            return Err(Error::InvalidArgument(
                "transfer function must be proper".into(),
            ));
        }
        Ok(Self { num, den })
    }

    pub fn constant(k: f64) -> Result<Self> {
        Self::new(vec![k], vec![1.0])
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }
    pub fn den(&self) -> &[f64] {
        &self.den
    }
    pub fn degree(&self) -> usize {
        self.den.len() - 1
    }

    pub fn poles(&self) -> Vec<Complex64> {
        poly_roots(&self.den)
    }

    pub fn frequency_response(&self, omega: f64) -> Result<Complex64> {
        let s = Complex64::new(0.0, omega);
        let den = poly_eval(&self.den, s);
        let scale = self.den.iter().map(|x| x.abs()).sum::<f64>()
            * (1.0 + omega.abs()).powi(self.degree() as i32);
        if den.norm() <= AXIS_POLE_TOL * scale {
            return Err(Error::PoleOnAxis { omega });
        }
        Ok(poly_eval(&self.num, s) / den)
    }

    /// Controllable canonical realization; order equals the denominator degree.
    pub fn realize(&self) -> Realization {
        let n = self.degree();
        let lead = self.den[n];
        let den: Vec<f64> = self.den.iter().map(|x| x / lead).collect();
        let mut num: Vec<f64> = self.num.iter().map(|x| x / lead).collect();
        num.resize(n + 1, 0.0);
        let d = num[n];
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = 1.0;
        }
        if n > 0 {
            for j in 0..n {
                a[(n - 1, j)] = -den[j];
            }
        }
        let mut b = DMatrix::zeros(n, 1);
        if n > 0 {
            b[(n - 1, 0)] = 1.0;
        }
        let c = DMatrix::from_fn(1, n, |_, j| num[j] - d * den[j]);
        Realization {
            a,
            b,
            c,
            d: DMatrix::from_element(1, 1, d),
        }
    }

    /// State-space form; fails for constant (zero-order) transfer functions.
    pub fn to_state_space(&self) -> Result<StateSpaceModel> {
        let r = self.realize();
        StateSpaceModel::new(r.a, r.b, r.c, r.d[(0, 0)])
    }
}

/// Transfer function of a state-space model via the Faddeev–LeVerrier
/// recursion. Common factors are not cancelled.
pub fn realize_transfer_function(model: &StateSpaceModel) -> RationalTransferFunction {
    let n = model.order();
    let a = model.a();
    // charpoly s^n + c[n-1] s^{n-1} + ... + c[0]; adj(sI - A) = sum_k M_k s^{n-k}
    let mut charpoly = vec![0.0; n + 1];
    charpoly[n] = 1.0;
    let mut num = vec![0.0; n + 1];
    let mut m = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        if k > 1 {
            m = a * &m + DMatrix::identity(n, n) * charpoly[n - k + 1];
        }
        num[n - k] = (model.c() * &m * model.b())[(0, 0)];
        charpoly[n - k] = -(a * &m).trace() / k as f64;
    }
    for (nk, ck) in num.iter_mut().zip(&charpoly) {
        *nk += model.d() * ck;
    }
    RationalTransferFunction::new_unchecked_axis(num, charpoly)
        .expect("characteristic polynomial is monic")
}

/// Anything with a frequency response and a finite pole set.
pub trait Plant: Sync {
    fn response(&self, omega: f64) -> Result<Complex64>;
    fn poles(&self) -> Vec<Complex64>;
    /// Limit of `P(jω)` as `ω → ∞` (the feedthrough term).
    fn high_frequency_gain(&self) -> f64;
}

impl Plant for StateSpaceModel {
    fn response(&self, omega: f64) -> Result<Complex64> {
        self.frequency_response(omega)
    }
    fn poles(&self) -> Vec<Complex64> {
        StateSpaceModel::poles(self)
    }
    fn high_frequency_gain(&self) -> f64 {
        self.d
    }
}

impl Plant for RationalTransferFunction {
    fn response(&self, omega: f64) -> Result<Complex64> {
        self.frequency_response(omega)
    }
    fn poles(&self) -> Vec<Complex64> {
        RationalTransferFunction::poles(self)
    }
    fn high_frequency_gain(&self) -> f64 {
        if self.num.len() == self.den.len() {
            self.num[self.num.len() - 1] / self.den[self.den.len() - 1]
        } else {
            0.0
        }
    }
}

/// One perturbation direction `(A^(k), B^(k), C^(k))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    #[serde(rename = "A", with = "matrix_rows")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B", with = "matrix_rows")]
    pub b: DMatrix<f64>,
    #[serde(rename = "C", with = "matrix_rows")]
    pub c: DMatrix<f64>,
}

impl Direction {
    pub fn zeros(n: usize) -> Self {
        Self {
            a: DMatrix::zeros(n, n),
            b: DMatrix::zeros(n, 1),
            c: DMatrix::zeros(1, n),
        }
    }
}

/// `θ ↦ (A⁰ + Σ θ_k A^(k), B⁰ + Σ θ_k B^(k), C⁰ + Σ θ_k C^(k))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyRepr")]
pub struct AffineParametricFamily {
    base: StateSpaceModel,
    directions: Vec<Direction>,
    #[serde(with = "vector")]
    nominal_theta: DVector<f64>,
}

#[derive(Deserialize)]
struct FamilyRepr {
    base: StateSpaceModel,
    #[serde(default)]
    directions: Vec<Direction>,
    #[serde(default, with = "opt_vector")]
    nominal_theta: Option<DVector<f64>>,
}

impl TryFrom<FamilyRepr> for AffineParametricFamily {
    type Error = Error;
    fn try_from(r: FamilyRepr) -> Result<Self> {
        let d = r.directions.len();
        Self::new(
            r.base,
            r.directions,
            r.nominal_theta.unwrap_or_else(|| DVector::zeros(d)),
        )
    }
}

impl AffineParametricFamily {
    pub fn new(
        base: StateSpaceModel,
        directions: Vec<Direction>,
        nominal_theta: DVector<f64>,
    ) -> Result<Self> {
        let n = base.order();
        for (k, dir) in directions.iter().enumerate() {
            if dir.a.shape() != (n, n) || dir.b.shape() != (n, 1) || dir.c.shape() != (1, n) {
                return Err(Error::Dimension(format!(
                    "direction {k} does not match base order {n}"
                )));
            }
        }
        if nominal_theta.len() != directions.len() {
            return Err(Error::Dimension(format!(
                "nominal theta has length {}, expected {}",
                nominal_theta.len(),
                directions.len()
            )));
        }
        Ok(Self {
            base,
            directions,
            nominal_theta,
        })
    }

    /// Family with no uncertainty: every parameter maps to `base`.
    pub fn fixed(base: StateSpaceModel) -> Self {
        Self {
            base,
            directions: Vec::new(),
            nominal_theta: DVector::zeros(0),
        }
    }

    pub fn base(&self) -> &StateSpaceModel {
        &self.base
    }
    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }
    pub fn nominal_theta(&self) -> &DVector<f64> {
        &self.nominal_theta
    }
    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    pub fn instantiate(&self, theta: &DVector<f64>) -> Result<StateSpaceModel> {
        if theta.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "theta has length {}, family has {} directions",
                theta.len(),
                self.dim()
            )));
        }
        let mut a = self.base.a.clone();
        let mut b = self.base.b.clone();
        let mut c = self.base.c.clone();
        for (t, dir) in theta.iter().zip(&self.directions) {
            a += &dir.a * *t;
            b += &dir.b * *t;
            c += &dir.c * *t;
        }
        StateSpaceModel::new(a, b, c, self.base.d)
    }

    /// The model at `nominal_theta`.
    pub fn nominal(&self) -> Result<StateSpaceModel> {
        self.instantiate(&self.nominal_theta)
    }

    /// `(z⁰, J)` with `vec(instantiate(θ)) = z⁰ + Jθ`; `vec` stacks the
    /// column-major entries of `A`, `B`, `C` in that order.
    pub fn vectorize(&self) -> (DVector<f64>, DMatrix<f64>) {
        let z0 = vectorize_model(&self.base);
        let mut j = DMatrix::zeros(z0.len(), self.dim());
        for (k, dir) in self.directions.iter().enumerate() {
            let col = stack(&dir.a, &dir.b, &dir.c);
            j.set_column(k, &col);
        }
        (z0, j)
    }

    /// Law of `vec(instantiate(θ))` for `θ ~ param`.
    pub fn pushforward_gaussian(&self, param: &GaussianParameter) -> Result<GaussianParameter> {
        if param.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "parameter has dimension {}, family has {}",
                param.dim(),
                self.dim()
            )));
        }
        let (z0, j) = self.vectorize();
        let mean = &j * &param.mean + z0;
        let cov = &j * &param.covariance * j.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(GaussianParameter {
            mean,
            covariance: cov,
        })
    }
}

/// `vec(A), vec(B), vec(C)` stacked.
pub fn vectorize_model(model: &StateSpaceModel) -> DVector<f64> {
    stack(&model.a, &model.b, &model.c)
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        a.len() + b.len() + c.len(),
        a.iter().chain(b.iter()).chain(c.iter()).copied(),
    )
}

/// Multivariate normal `N(mean, covariance)` with a PSD covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr")]
pub struct GaussianParameter {
    #[serde(with = "vector")]
    mean: DVector<f64>,
    #[serde(with = "matrix_rows")]
    covariance: DMatrix<f64>,
}

#[derive(Deserialize)]
struct GaussianRepr {
    #[serde(with = "vector")]
    mean: DVector<f64>,
    #[serde(with = "matrix_rows")]
    covariance: DMatrix<f64>,
}

impl TryFrom<GaussianRepr> for GaussianParameter {
    type Error = Error;
    fn try_from(r: GaussianRepr) -> Result<Self> {
        Self::new(r.mean, r.covariance)
    }
}

impl GaussianParameter {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "covariance is {:?}, expected ({d}, {d})",
                covariance.shape()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "non-finite Gaussian parameter".into(),
            ));
        }
        if (&covariance - covariance.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidArgument("covariance is not symmetric".into()));
        }
        if d > 0 {
            let min_eig = covariance.clone().symmetric_eigenvalues().min();
            if min_eig < -1e-12 {
                return Err(Error::NotPsd { min_eig });
            }
        }
        Ok(Self { mean, covariance })
    }

    /// `N(μ·1, σ²I)` in `d` dimensions.
    pub fn isotropic(d: usize, mu: f64, sigma: f64) -> Result<Self> {
        Self::new(
            DVector::from_element(d, mu),
            DMatrix::identity(d, d) * (sigma * sigma),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// `L` with `L Lᵀ = Σ`: Cholesky when Σ is positive definite, otherwise
    /// `V diag(√max(λ, 0))` from the symmetric eigendecomposition.
    pub fn factor(&self) -> DMatrix<f64> {
        if let Some(ch) = self.covariance.clone().cholesky() {
            return ch.l();
        }
        let eig = self.covariance.clone().symmetric_eigen();
        let mut v = eig.eigenvectors;
        for (k, lam) in eig.eigenvalues.iter().enumerate() {
            let s = lam.max(0.0).sqrt();
            v.column_mut(k).scale_mut(s);
        }
        v
    }
}

/// One draw of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSample {
    #[serde(with = "vector")]
    pub theta: DVector<f64>,
    #[serde(flatten)]
    pub model: StateSpaceModel,
}

/// `N` i.i.d. draws `θ ~ param` pushed through `family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnsembleRepr")]
pub struct SystemEnsemble {
    seed: u64,
    family: AffineParametricFamily,
    param: GaussianParameter,
    samples: Vec<EnsembleSample>,
}

#[derive(Deserialize)]
struct EnsembleRepr {
    seed: u64,
    family: AffineParametricFamily,
    param: GaussianParameter,
    samples: Vec<EnsembleSample>,
}

impl TryFrom<EnsembleRepr> for SystemEnsemble {
    type Error = Error;
    fn try_from(r: EnsembleRepr) -> Result<Self> {
        Self::from_parts(r.seed, r.family, r.param, r.samples)
    }
}

impl SystemEnsemble {
    /// Assembles an ensemble from stored draws, checking every model against
    /// `family.instantiate(theta)`.
    pub fn from_parts(
        seed: u64,
        family: AffineParametricFamily,
        param: GaussianParameter,
        samples: Vec<EnsembleSample>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument(
                "ensemble needs at least one sample".into(),
            ));
        }
        if param.dim() != family.dim() {
            return Err(Error::Dimension(
                "parameter and family dimensions differ".into(),
            ));
        }
        for (i, s) in samples.iter().enumerate() {
            let expect = family.instantiate(&s.theta)?;
            let scale = 1.0 + expect.a.amax().max(expect.b.amax()).max(expect.c.amax());
            let diff = (&expect.a - &s.model.a)
                .amax()
                .max((&expect.b - &s.model.b).amax())
                .max((&expect.c - &s.model.c).amax());
            if diff > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!(
                    "sample {i} does not match its theta"
                )));
            }
        }
        Ok(Self {
            seed,
            family,
            param,
            samples,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn family(&self) -> &AffineParametricFamily {
        &self.family
    }
    pub fn param(&self) -> &GaussianParameter {
        &self.param
    }
    pub fn samples(&self) -> &[EnsembleSample] {
        &self.samples
    }
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
    pub fn models(&self) -> impl Iterator<Item = &StateSpaceModel> {
        self.samples.iter().map(|s| &s.model)
    }
}

/// Draws `n` parameters from `param` with a ChaCha20 stream seeded by `seed`
/// (`θ = μ + L z`, `z` standard normal via the ziggurat sampler) and
/// instantiates one model per draw. Draws are generated sequentially.
pub fn sample_ensemble(
    family: &AffineParametricFamily,
    param: &GaussianParameter,
    n: usize,
    seed: u64,
) -> Result<SystemEnsemble> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "ensemble size must be at least 1".into(),
        ));
    }
    if param.dim() != family.dim() {
        return Err(Error::Dimension(format!(
            "parameter has dimension {}, family has {}",
            param.dim(),
            family.dim()
        )));
    }
    let l = param.factor();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let d = family.dim();
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(&mut rng)));
        let theta = &param.mean + &l * z;
        let model = family.instantiate(&theta)?;
        samples.push(EnsembleSample { theta, model });
    }
    Ok(SystemEnsemble {
        seed,
        family: family.clone(),
        param: param.clone(),
        samples,
    })
}

/// `d` direction triples with standard-normal entries, each matrix scaled to
/// unit spectral norm.
pub fn random_directions(n: usize, d: usize, seed: u64) -> Vec<Direction> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draw = |r: usize, c: usize| {
        let m = DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
        let norm = spectral_norm(&m);
        if norm > 0.0 {
            m / norm
        } else {
            m
        }
    };
    (0..d)
        .map(|_| {
            let a = draw(n, n);
            let b = draw(n, 1);
            let c = draw(1, n);
            Direction { a, b, c }
        })
        .collect()
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Eigenvalues via nalgebra's real Schur form, which keeps conjugate pairs
/// exact; when that iteration stalls, via [`complex_schur`].
pub(crate) fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    if a.is_empty() {
        return Vec::new();
    }
    if let Some(s) = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 10_000) {
        return s.complex_eigenvalues().iter().copied().collect();
    }
    match complex_schur(a.map(|x| Complex64::new(x, 0.0))) {
        Ok((_, t)) => t.diagonal().iter().copied().collect(),
        Err(_) => vec![Complex64::new(f64::NAN, f64::NAN); a.nrows()],
    }
}

/// Solves `m x = rhs`; `None` when `m` is numerically singular.
pub(crate) fn solve_complex(
    m: DMatrix<Complex64>,
    rhs: DMatrix<Complex64>,
) -> Option<DMatrix<Complex64>> {
    let scale = m.iter().fold(0.0_f64, |s, z| s.max(z.norm()));
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = u
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |s, z| s.min(z.norm()));
    if !(min_pivot > AXIS_POLE_TOL * scale.max(f64::MIN_POSITIVE)) {
        return None;
    }
    lu.solve(&rhs)
}

pub(crate) fn poly_eval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Roots of a polynomial given in ascending powers (companion eigenvalues).
pub(crate) fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = coeffs[n];
    let mut comp = DMatrix::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -coeffs[i] / lead;
    }
    eigenvalues(&comp)
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    #[serde(rename = "A", with = "matrix_rows")]
    a: DMatrix<f64>,
    #[serde(rename = "B", with = "matrix_rows")]
    b: DMatrix<f64>,
    #[serde(rename = "C", with = "matrix_rows")]
    c: DMatrix<f64>,
    #[serde(rename = "D", default, skip_serializing_if = "is_zero")]
    d: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl TryFrom<ModelRepr> for StateSpaceModel {
    type Error = Error;
    fn try_from(r: ModelRepr) -> Result<Self> {
        Self::new(r.a, r.b, r.c, r.d)
    }
}

impl From<StateSpaceModel> for ModelRepr {
    fn from(m: StateSpaceModel) -> Self {
        Self {
            a: m.a,
            b: m.b,
            c: m.c,
            d: m.d,
        }
    }
}

/// Row-major nested arrays for matrices.
pub(crate) mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nr = rows.len();
        let nc = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != nc) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
    }
}

pub(crate) mod vector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

mod opt_vector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer};

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DVector<f64>>, D::Error> {
        Ok(Option::<Vec<f64>>::deserialize(d)?.map(DVector::from_vec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lag() -> RationalTransferFunction {
        RationalTransferFunction::new(vec![1.0], vec![1.0, 0.5]).unwrap()
    }

    #[test]
    fn first_order_lag_response() {
        let p = lag();
        assert_eq!(p.frequency_response(0.0).unwrap(), Complex64::new(1.0, 0.0));
        let r = p.frequency_response(2.0).unwrap();
        assert_relative_eq!(r.re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(r.im, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn realize_scalar() {
        let m = StateSpaceModel::from_rows(&[&[-2.0]], &[1.0], &[1.0], 0.0).unwrap();
        let tf = realize_transfer_function(&m);
        assert_eq!(tf.num(), &[1.0]);
        assert_eq!(tf.den(), &[2.0, 1.0]);
    }

    #[test]
    fn realize_companion_pair() {
        let m = StateSpaceModel::from_rows(
            &[&[0.0, 1.0], &[-2.0, -0.5]],
            &[0.0, 1.0],
            &[1.0, 0.0],
            0.0,
        )
        .unwrap();
        let tf = realize_transfer_function(&m);
        assert_eq!(tf.num(), &[1.0]);
        for (x, y) in tf.den().iter().zip([2.0, 0.5, 1.0]) {
            assert_relative_eq!(*x, y, epsilon = 1e-15);
        }
    }

    #[test]
    fn state_space_and_rational_agree() {
        let tf = RationalTransferFunction::new(vec![1.0], vec![1.0, 0.9, 0.1]).unwrap();
        let ss = tf.to_state_space().unwrap();
        for k in 0..100 {
            let w = 10f64.powf(-2.0 + 4.0 * k as f64 / 99.0);
            let a = tf.frequency_response(w).unwrap();
            let b = ss.frequency_response(w).unwrap();
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn integrator_pole_detected() {
        let m = StateSpaceModel::from_rows(&[&[0.0]], &[1.0], &[1.0], 0.0).unwrap();
        assert!(matches!(
            m.frequency_response(0.0),
            Err(Error::PoleOnAxis { .. })
        ));
        assert!(RationalTransferFunction::new(vec![1.0], vec![0.0, 1.0]).is_err());
        assert!(RationalTransferFunction::new(vec![1.0], vec![1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn improper_rejected() {
        assert!(RationalTransferFunction::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(RationalTransferFunction::new(vec![1.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn instantiate_linear() {
        let base = StateSpaceModel::from_rows(&[&[0.0]], &[1.0], &[1.0], 0.0).unwrap();
        let dir = Direction {
            a: DMatrix::from_element(1, 1, 1.0),
            b: DMatrix::zeros(1, 1),
            c: DMatrix::zeros(1, 1),
        };
        let fam = AffineParametricFamily::new(base.clone(), vec![dir], DVector::zeros(1)).unwrap();
        assert_eq!(fam.instantiate(&DVector::zeros(1)).unwrap(), base);
        assert_eq!(
            fam.instantiate(&DVector::from_element(1, 2.0)).unwrap().a()[(0, 0)],
            2.0
        );
        assert!(fam.instantiate(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn vectorize_scalar_model() {
        let base = StateSpaceModel::from_rows(&[&[3.0]], &[5.0], &[7.0], 0.0).unwrap();
        let fam =
            AffineParametricFamily::new(base, vec![Direction::zeros(1); 2], DVector::zeros(2))
                .unwrap();
        let (z0, j) = fam.vectorize();
        assert_eq!(z0.as_slice(), &[3.0, 5.0, 7.0]);
        assert!(j.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn non_psd_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianParameter::new(DVector::zeros(2), cov),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn singular_covariance_factor() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let g = GaussianParameter::new(DVector::zeros(2), cov.clone()).unwrap();
        let l = g.factor();
        assert!((&l * l.transpose() - cov).amax() < 1e-12);
    }

    #[test]
    fn zero_covariance_ensemble_is_constant() {
        let base = StateSpaceModel::from_rows(&[&[-1.0]], &[1.0], &[1.0], 0.0).unwrap();
        let dir = Direction {
            a: DMatrix::from_element(1, 1, 1.0),
            ..Direction::zeros(1)
        };
        let fam = AffineParametricFamily::new(base, vec![dir], DVector::zeros(1)).unwrap();
        let p =
            GaussianParameter::new(DVector::from_element(1, 0.3), DMatrix::zeros(1, 1)).unwrap();
        let e = sample_ensemble(&fam, &p, 5, 1).unwrap();
        let mean_model = fam.instantiate(p.mean()).unwrap();
        assert!(e.models().all(|m| *m == mean_model));
    }

    #[test]
    fn ensemble_json_roundtrip() {
        let base = StateSpaceModel::from_rows(
            &[&[0.0, 1.0], &[-2.0, -0.5]],
            &[0.0, 1.0],
            &[1.0, 0.0],
            0.0,
        )
        .unwrap();
        let fam = AffineParametricFamily::new(base, random_directions(2, 3, 4), DVector::zeros(3))
            .unwrap();
        let p = GaussianParameter::isotropic(3, 0.01, 0.01).unwrap();
        let e = sample_ensemble(&fam, &p, 4, 9).unwrap();
        let s = crate::io::to_json_string(&e).unwrap();
        let back: SystemEnsemble = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        assert_eq!(crate::io::to_json_string(&back).unwrap(), s);
    }

    #[test]
    fn tampered_sample_rejected() {
        let base = StateSpaceModel::from_rows(&[&[-1.0]], &[1.0], &[1.0], 0.0).unwrap();
        let fam = AffineParametricFamily::new(base, random_directions(1, 1, 0), DVector::zeros(1))
            .unwrap();
        let p = GaussianParameter::isotropic(1, 0.0, 0.1).unwrap();
        let e = sample_ensemble(&fam, &p, 2, 0).unwrap();
        let mut v: serde_json::Value =
            serde_json::from_str(&crate::io::to_json_string(&e).unwrap()).unwrap();
        v["samples"][0]["A"][0][0] = serde_json::json!(5.0);
        assert!(serde_json::from_value::<SystemEnsemble>(v).is_err());
    }

    #[test]
    fn random_directions_unit_norm() {
        for dir in random_directions(3, 4, 11) {
            for m in [&dir.a, &dir.b, &dir.c] {
                assert!((spectral_norm(m) - 1.0).abs() < 1e-12);
            }
        }
    }
}
