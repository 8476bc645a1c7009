//! Normalized right coprime factorization `P = N D⁻¹` of a SISO plant.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::care::solve_care;
use crate::error::{Error, Result};
use crate::lti::{eigenvalues, solve_complex, Realization, StateSpaceModel};

/// `N = (A+BF, B R^{-1/2}, C+dF, d R^{-1/2})`, `D = (A+BF, B R^{-1/2}, F, R^{-1/2})`
/// with `R = 1 + d²`. Both share the closed-loop state matrix.
#[derive(Debug, Clone)]
pub struct NormalizedCoprimeFactors {
    ac: DMatrix<f64>,
    b: DMatrix<f64>,
    f: DMatrix<f64>,
    cn: DMatrix<f64>,
    dd: f64,
    dn: f64,
    x: DMatrix<f64>,
    subspace_condition: f64,
}

impl NormalizedCoprimeFactors {
    /// State matrix `A + BF` shared by both factors.
    pub fn closed_loop(&self) -> &DMatrix<f64> {
        &self.ac
    }
    /// State feedback row `F`.
    pub fn feedback(&self) -> &DMatrix<f64> {
        &self.f
    }
    /// Stabilizing Riccati solution.
    pub fn riccati(&self) -> &DMatrix<f64> {
        &self.x
    }
    pub fn subspace_condition(&self) -> f64 {
        self.subspace_condition
    }

    pub fn numerator(&self) -> Realization {
        Realization {
            a: self.ac.clone(),
            b: self.b.clone(),
            c: self.cn.clone(),
            d: DMatrix::from_element(1, 1, self.dn),
        }
    }

    pub fn denominator(&self) -> Realization {
        Realization {
            a: self.ac.clone(),
            b: self.b.clone(),
            c: self.f.clone(),
            d: DMatrix::from_element(1, 1, self.dd),
        }
    }

    /// Graph symbol `[D; N]` as a one-input, two-output realization.
    pub fn graph_symbol(&self) -> Realization {
        let n = self.ac.nrows();
        let mut c = DMatrix::zeros(2, n);
        c.row_mut(0).copy_from(&self.f.row(0));
        c.row_mut(1).copy_from(&self.cn.row(0));
        Realization {
            a: self.ac.clone(),
            b: self.b.clone(),
            c,
            d: DMatrix::from_row_slice(2, 1, &[self.dd, self.dn]),
        }
    }

    /// `(D(jω), N(jω))`.
    pub fn response(&self, omega: f64) -> Result<(Complex64, Complex64)> {
        let n = self.ac.nrows();
        if n == 0 {
            return Ok((Complex64::new(self.dd, 0.0), Complex64::new(self.dn, 0.0)));
        }
        let mut m = self.ac.map(|x| Complex64::new(-x, 0.0));
        for i in 0..n {
            m[(i, i)] += Complex64::new(0.0, omega);
        }
        let v = solve_complex(m, self.b.map(|x| Complex64::new(x, 0.0)))
            .ok_or(Error::PoleOnAxis { omega })?;
        let dot = |row: &DMatrix<f64>| {
            (0..n).fold(Complex64::new(0.0, 0.0), |acc, k| {
                acc + v[(k, 0)] * row[(0, k)]
            })
        };
        Ok((dot(&self.f) + self.dd, dot(&self.cn) + self.dn))
    }
}

/// Normalized coprime factors of a SISO state-space model.
pub fn nrcf(model: &StateSpaceModel) -> Result<NormalizedCoprimeFactors> {
    nrcf_realization(&model.realization())
}

/// As [`nrcf`] for a SISO [`Realization`], which may have no states.
pub fn nrcf_realization(sys: &Realization) -> Result<NormalizedCoprimeFactors> {
    if sys.inputs() != 1 || sys.outputs() != 1 {
        return Err(Error::Dimension(
            "coprime factorization is implemented for SISO plants".into(),
        ));
    }
    let n = sys.order();
    let d = sys.d[(0, 0)];
    let r = 1.0 + d * d;
    let rs = r.sqrt();
    if n == 0 {
        return Ok(NormalizedCoprimeFactors {
            ac: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, 1),
            f: DMatrix::zeros(1, 0),
            cn: DMatrix::zeros(1, 0),
            dd: 1.0 / rs,
            dn: d / rs,
            x: DMatrix::zeros(0, 0),
            subspace_condition: 1.0,
        });
    }
    let (a, b, c) = (&sys.a, &sys.b, &sys.c);
    let ar = a - b * c * (d / r);
    let g = b * b.transpose() / r;
    let q = c.transpose() * c / r;
    let sol = solve_care(&ar, &g, &q)?;
    let f = -(b.transpose() * &sol.x + c * d) / r;
    let ac = a + b * &f;
    if eigenvalues(&ac).iter().any(|l| !(l.re < 0.0)) {
        return Err(Error::Domain("Riccati feedback is not stabilizing".into()));
    }
    Ok(NormalizedCoprimeFactors {
        b: b / rs,
        cn: c + &f * d,
        f,
        ac,
        dd: 1.0 / rs,
        dn: d / rs,
        x: sol.x,
        subspace_condition: sol.subspace_condition,
    })
}
