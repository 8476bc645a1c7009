//! H∞ norm of a stable realization by Hamiltonian level-set iteration.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lti::{eigenvalues, Realization};

/// Relative tolerance of the returned norm.
pub const HINF_RTOL: f64 = 1e-6;

/// Peak gain and the frequency at which it is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfNorm {
    pub value: f64,
    pub omega: f64,
    pub iterations: usize,
}

fn sigma_max(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// `sup_ω σ_max(G(jω))` for a stable realization.
///
/// Each step fixes a level `γ` just above the best value seen so far; the
/// Hamiltonian built at that level has imaginary eigenvalues exactly where some
/// singular value crosses `γ`, and the next candidate frequencies are the
/// midpoints of those crossings. The loop stops when no crossing remains.
pub fn hinf_norm(sys: &Realization) -> Result<HinfNorm> {
    let n = sys.order();
    let dmax = sigma_max(&sys.d.map(|x| Complex64::new(x, 0.0)));
    if n == 0 {
        return Ok(HinfNorm {
            value: dmax,
            omega: f64::INFINITY,
            iterations: 0,
        });
    }
    let poles = sys.poles();
    if poles.iter().any(|p| !(p.re < 0.0)) {
        return Err(Error::Domain(
            "H-infinity norm requires a stable system".into(),
        ));
    }

    let mut best = (dmax, f64::INFINITY);
    let probe = |w: f64, best: &mut (f64, f64)| -> Result<()> {
        let s = sigma_max(&sys.response(w)?);
        if s > best.0 {
            *best = (s, w);
        }
        Ok(())
    };
    probe(0.0, &mut best)?;
    for p in &poles {
        let w = if p.re.abs() < p.im.abs() {
            p.im.abs()
        } else {
            p.norm()
        };
        probe(w, &mut best)?;
    }
    if best.0 == 0.0 {
        return Ok(HinfNorm {
            value: 0.0,
            omega: 0.0,
            iterations: 0,
        });
    }

    let (a, b, c, d) = (&sys.a, &sys.b, &sys.c, &sys.d);
    let (p, m) = (sys.outputs(), sys.inputs());
    for it in 1..=200 {
        let gamma = (1.0 + 2.0 * HINF_RTOL) * best.0;
        let r = DMatrix::<f64>::identity(m, m) * (gamma * gamma) - d.transpose() * d;
        let r_inv = r
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular level-set weighting".into()))?;
        let a_h = a + b * &r_inv * d.transpose() * c;
        let s = DMatrix::<f64>::identity(p, p) + d * &r_inv * d.transpose();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&a_h);
        h.view_mut((0, n), (n, n))
            .copy_from(&(b * &r_inv * b.transpose()));
        h.view_mut((n, 0), (n, n))
            .copy_from(&(-(c.transpose() * s * c)));
        h.view_mut((n, n), (n, n)).copy_from(&(-a_h.transpose()));
        let scale = h.amax().max(1.0);

        let mut ws: Vec<f64> = eigenvalues(&h)
            .iter()
            .filter(|l| l.re.abs() <= 1e-7 * scale.max(l.norm()))
            .map(|l| l.im)
            .collect();
        if ws.is_empty() {
            return Ok(HinfNorm {
                value: best.0,
                omega: best.1,
                iterations: it,
            });
        }
        ws.sort_by(f64::total_cmp);
        let before = best.0;
        for pair in ws.windows(2) {
            probe(0.5 * (pair[0] + pair[1]).abs(), &mut best)?;
        }
        for &w in &ws {
            probe(w.abs(), &mut best)?;
        }
        if best.0 <= before {
            // only spurious crossings remain
            return Ok(HinfNorm {
                value: best.0,
                omega: best.1,
                iterations: it,
            });
        }
    }
    Err(Error::Numerical(
        "H-infinity iteration did not converge".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::RationalTransferFunction;

    #[test]
    fn first_order_lag() {
        let g = RationalTransferFunction::new(vec![1.0], vec![1.0, 1.0])
            .unwrap()
            .realize();
        let h = hinf_norm(&g).unwrap();
        assert!((h.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_gain() {
        let g = RationalTransferFunction::constant(-2.5).unwrap().realize();
        assert_eq!(hinf_norm(&g).unwrap().value, 2.5);
    }

    #[test]
    fn unstable_rejected() {
        let g = RationalTransferFunction::new(vec![1.0], vec![-1.0, 1.0])
            .unwrap()
            .realize();
        assert!(matches!(hinf_norm(&g), Err(Error::Domain(_))));
    }

    #[test]
    fn resonant_peak_matches_dense_sweep() {
        let tf = RationalTransferFunction::new(vec![1.0], vec![1.0, 0.2, 1.0]).unwrap();
        let h = hinf_norm(&tf.realize()).unwrap();
        let m = 1_000_000;
        let (lo, hi) = (-3.0f64, 3.0f64);
        let sweep = (0..m)
            .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (m - 1) as f64))
            .map(|w| {
                let s = Complex64::new(0.0, w);
                (1.0 / (s * s + 0.2 * s + 1.0)).norm()
            })
            .fold(0.0, f64::max);
        assert!(
            (h.value - sweep).abs() <= 1e-5 * sweep,
            "{} vs {}",
            h.value,
            sweep
        );
    }

    #[test]
    fn mimo_peak_above_each_entry() {
        let sys = Realization {
            a: DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -0.3]),
            b: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.2, 1.0]),
            c: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]),
            d: DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.0]),
        };
        let h = hinf_norm(&sys).unwrap();
        for k in 0..2000 {
            let w = 10f64.powf(-3.0 + 6.0 * k as f64 / 1999.0);
            assert!(sigma_max(&sys.response(w).unwrap()) <= h.value * (1.0 + 1e-9));
        }
    }
}
