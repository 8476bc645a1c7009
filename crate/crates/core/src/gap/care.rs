//! Continuous-time algebraic Riccati equation via the ordered Schur form of the
//! Hamiltonian matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::schur::complex_schur;

/// Hamiltonian eigenvalues closer than this to the imaginary axis are rejected.
pub const AXIS_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CareSolution {
    /// Stabilizing solution, symmetric.
    pub x: DMatrix<f64>,
    /// 2-norm condition number of the stable-subspace block that gets inverted.
    pub subspace_condition: f64,
}

/// Stabilizing solution of `AᵀX + XA − X G X + Q = 0` with `G = B R⁻¹ Bᵀ`
/// supplied directly (symmetric PSD) and `Q` symmetric.
pub fn solve_care(a: &DMatrix<f64>, g: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<CareSolution> {
    let n = a.nrows();
    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let hc = h.map(|x| Complex64::new(x, 0.0));
    let (mut z, mut t) = complex_schur(hc)?;

    for k in 0..2 * n {
        let lam = t[(k, k)];
        if lam.re.abs() <= AXIS_TOL * (1.0 + lam.norm()) {
            return Err(Error::IllConditioned(format!(
                "Hamiltonian eigenvalue {lam} lies on the imaginary axis; no stabilizing solution"
            )));
        }
    }

    reorder_stable_first(&mut t, &mut z);
    let stable = (0..2 * n).take_while(|&k| t[(k, k)].re < 0.0).count();
    if stable != n {
        return Err(Error::Domain(format!(
            "Hamiltonian has {stable} stable eigenvalues, expected {n}"
        )));
    }

    let u1 = z.view((0, 0), (n, n)).into_owned();
    let u2 = z.view((n, 0), (n, n)).into_owned();
    let sv = u1.clone().singular_values();
    let smin = sv.min();
    if !(smin > 0.0) {
        return Err(Error::Domain(
            "stable subspace is not a graph; no stabilizing solution".into(),
        ));
    }
    let subspace_condition = sv.max() / smin;

    // X = U2 U1⁻¹  ⇔  U1ᵀ Xᵀ = U2ᵀ
    let xt = u1
        .transpose()
        .lu()
        .solve(&u2.transpose())
        .ok_or_else(|| Error::Domain("singular stable-subspace basis".into()))?;
    let xc = xt.transpose();
    let x = xc.map(|z| z.re);
    let x = (&x + x.transpose()) * 0.5;
    Ok(CareSolution {
        x,
        subspace_condition,
    })
}

/// Reorders a complex Schur form `H = Z T Zᴴ` so that eigenvalues with negative
/// real part come first, using adjacent Givens swaps.
fn reorder_stable_first(t: &mut DMatrix<Complex64>, z: &mut DMatrix<Complex64>) {
    let m = t.nrows();
    loop {
        let mut swapped = false;
        for k in 0..m.saturating_sub(1) {
            if t[(k, k)].re >= 0.0 && t[(k + 1, k + 1)].re < 0.0 {
                swap_adjacent(t, z, k);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
}

fn swap_adjacent(t: &mut DMatrix<Complex64>, z: &mut DMatrix<Complex64>, k: usize) {
    let m = t.nrows();
    let a = t[(k, k)];
    let b = t[(k, k + 1)];
    let c = t[(k + 1, k + 1)];
    // eigenvector of the 2×2 block for eigenvalue c
    let (v1, v2) = (b, c - a);
    let nv = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if nv == 0.0 {
        return;
    }
    let (g11, g21) = (v1 / nv, v2 / nv);
    let (g12, g22) = (-g21.conj(), g11.conj());

    // rows k, k+1 ← Gᴴ · rows
    for j in 0..m {
        let (x, y) = (t[(k, j)], t[(k + 1, j)]);
        t[(k, j)] = g11.conj() * x + g21.conj() * y;
        t[(k + 1, j)] = g12.conj() * x + g22.conj() * y;
    }
    // cols k, k+1 ← cols · G
    for i in 0..m {
        let (x, y) = (t[(i, k)], t[(i, k + 1)]);
        t[(i, k)] = x * g11 + y * g21;
        t[(i, k + 1)] = x * g12 + y * g22;
        let (x, y) = (z[(i, k)], z[(i, k + 1)]);
        z[(i, k)] = x * g11 + y * g21;
        z[(i, k + 1)] = x * g12 + y * g22;
    }
    t[(k + 1, k)] = Complex64::new(0.0, 0.0);
}
