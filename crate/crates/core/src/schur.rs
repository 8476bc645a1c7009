//! Complex Schur decomposition by single-shift Hessenberg QR.
//!
//! nalgebra's Schur iteration has no exceptional shifts and can stall on
//! benign inputs; this one follows the classical recipe (Wilkinson shifts, an
//! ad hoc shift every tenth sweep without deflation) and reports failure
//! instead of looping.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Rotation `G = [c, s; −s̄, c]` with `G [a; b] = [r; 0]`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let (na, nb) = (a.norm(), b.norm());
    if nb == 0.0 {
        return (1.0, ZERO);
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb);
    }
    let rho = na.hypot(nb);
    (na / rho, (a / na) * b.conj() / rho)
}

/// `rows i, j ← G · rows` over columns `cols`.
fn rotate_rows(
    t: &mut DMatrix<Complex64>,
    i: usize,
    j: usize,
    c: f64,
    s: Complex64,
    cols: std::ops::Range<usize>,
) {
    for col in cols {
        let (x, y) = (t[(i, col)], t[(j, col)]);
        t[(i, col)] = x * c + s * y;
        t[(j, col)] = -s.conj() * x + y * c;
    }
}

/// `columns i, j ← columns · Gᴴ` over rows `rows`.
fn rotate_cols(
    t: &mut DMatrix<Complex64>,
    i: usize,
    j: usize,
    c: f64,
    s: Complex64,
    rows: std::ops::Range<usize>,
) {
    for r in rows {
        let (x, y) = (t[(r, i)], t[(r, j)]);
        t[(r, i)] = x * c + y * s.conj();
        t[(r, j)] = -x * s + y * c;
    }
}

/// Eigenvalue of `[a, b; c, d]` closest to `d`.
fn wilkinson(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let (m1, m2) = ((a + d) * 0.5 + disc, (a + d) * 0.5 - disc);
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// `H = Z T Zᴴ` with `Z` unitary and `T` upper triangular.
pub(crate) fn complex_schur(
    h: DMatrix<Complex64>,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let n = h.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
    }
    let (mut z, mut t) = h.hessenberg().unpack();
    for i in 2..n {
        for j in 0..i - 1 {
            t[(i, j)] = ZERO;
        }
    }

    let eps = f64::EPSILON;
    let tiny = f64::MIN_POSITIVE / eps;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let max_iter = 30 * n.max(10);
    while hi > 0 {
        // find the start of the unreduced block ending at `hi`
        let mut lo = hi;
        while lo > 0 {
            let sub = t[(lo, lo - 1)].norm();
            let diag = t[(lo, lo)].norm() + t[(lo - 1, lo - 1)].norm();
            if sub <= eps * diag || sub <= tiny {
                t[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        if iter > max_iter {
            return Err(Error::Numerical(
                "complex Schur iteration did not converge".into(),
            ));
        }

        let shift = if iter.is_multiple_of(10) {
            t[(hi, hi)] + 0.75 * t[(hi, hi - 1)].re.abs()
        } else {
            wilkinson(
                t[(hi - 1, hi - 1)],
                t[(hi - 1, hi)],
                t[(hi, hi - 1)],
                t[(hi, hi)],
            )
        };

        let (c, s) = givens(t[(lo, lo)] - shift, t[(lo + 1, lo)]);
        rotate_rows(&mut t, lo, lo + 1, c, s, lo..n);
        rotate_cols(&mut t, lo, lo + 1, c, s, 0..(lo + 3).min(hi + 1));
        rotate_cols(&mut z, lo, lo + 1, c, s, 0..n);
        for k in lo + 1..hi {
            let (c, s) = givens(t[(k, k - 1)], t[(k + 1, k - 1)]);
            rotate_rows(&mut t, k, k + 1, c, s, k - 1..n);
            t[(k + 1, k - 1)] = ZERO;
            rotate_cols(&mut t, k, k + 1, c, s, 0..(k + 3).min(hi + 1));
            rotate_cols(&mut z, k, k + 1, c, s, 0..n);
        }
    }
    Ok((z, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn check(h: &DMatrix<Complex64>) {
        let (z, t) = complex_schur(h.clone()).unwrap();
        let n = h.nrows();
        let scale = h.iter().fold(1.0_f64, |m, x| m.max(x.norm()));
        let back = &z * &t * z.adjoint();
        assert!((back - h).iter().all(|x| x.norm() <= 1e-12 * scale));
        let unit = z.adjoint() * &z - DMatrix::<Complex64>::identity(n, n);
        assert!(unit.iter().all(|x| x.norm() <= 1e-12));
        for i in 1..n {
            for j in 0..i {
                assert_eq!(t[(i, j)], ZERO);
            }
        }
    }

    #[test]
    fn hamiltonian_that_stalls_plain_qr() {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[
                -0.9754182728501363,
                -0.09859749886082766,
                0.22834762566229155,
                0.20468883116282044,
                -3.0619295140018625,
                0.21290251985868786,
                -0.4050182936326845,
                -0.6298572259505236,
                -2.7623276516618422,
            ],
        );
        let b = DMatrix::from_column_slice(
            3,
            1,
            &[0.9373350030918681, -0.6543756744481496, 1.2193660417340604],
        );
        let c = DMatrix::from_row_slice(
            1,
            3,
            &[
                -1.6541362568624727,
                0.18264784339936674,
                -1.0245460295276991,
            ],
        );
        let mut h = DMatrix::<f64>::zeros(6, 6);
        h.view_mut((0, 0), (3, 3)).copy_from(&a);
        h.view_mut((0, 3), (3, 3))
            .copy_from(&(-(&b * b.transpose())));
        h.view_mut((3, 0), (3, 3))
            .copy_from(&(-(c.transpose() * &c)));
        h.view_mut((3, 3), (3, 3)).copy_from(&(-a.transpose()));
        check(&h.map(|x| Complex64::new(x, 0.0)));
    }

    #[test]
    fn jordan_block_and_zero() {
        let j = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 2.0]);
        check(&j.map(|x| Complex64::new(x, 0.0)));
        check(&DMatrix::<Complex64>::zeros(4, 4));
    }

    #[test]
    fn rotation_by_quarter_turn() {
        let r = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let (_, t) = complex_schur(r.map(|x| Complex64::new(x, 0.0))).unwrap();
        let mut ims = [t[(0, 0)].im, t[(1, 1)].im];
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + 1.0).abs() < 1e-14 && (ims[1] - 1.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn random_matrices_decompose(n in 1usize..8, seed in proptest::collection::vec(-3.0..3.0f64, 128)) {
            let h = DMatrix::from_fn(n, n, |i, j| Complex64::new(seed[i * n + j], seed[64 + i * n + j]));
            check(&h);
        }
    }
}
