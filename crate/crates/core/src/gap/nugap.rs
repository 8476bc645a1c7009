//! Pointwise chordal distance `κ` and the ν-gap.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::lti::Plant;

/// `|p1 − p2| / √((1+|p1|²)(1+|p2|²))`.
#[inline]
pub fn kappa(p1: Complex64, p2: Complex64) -> f64 {
    let num = (p1 - p2).norm();
    let den = ((1.0 + p1.norm_sqr()) * (1.0 + p2.norm_sqr())).sqrt();
    (num / den).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuGapResult {
    pub value: f64,
    pub winding_ok: bool,
    pub argmax_omega: f64,
    /// `(ω, κ(P₁(jω), P₂(jω)))` on the supplied grid.
    pub kappa_curve: Vec<(f64, f64)>,
}

const MIN_RETURN_DIFFERENCE: f64 = 1e-12;
const MAX_BISECTIONS: usize = 40;

fn open_rhp_poles<P: Plant + ?Sized>(p: &P) -> usize {
    p.poles().iter().filter(|z| z.re > 0.0).count()
}

fn axis_poles<P: Plant + ?Sized>(p: &P) -> bool {
    p.poles()
        .iter()
        .any(|z| !(z.re.abs() > 1e-10 * (1.0 + z.norm())))
}

/// ν-gap between two plants evaluated on `grid`.
///
/// The winding condition is checked on `g = 1 + conj(P₂)P₁` from `ω = 0` to
/// `ω = ∞`: the grid is extended six decades on either side and refined
/// wherever successive phase steps exceed π/4. With `wno` the net number of
/// counterclockwise turns of `g(jω)` as `ω` runs over the whole real line, the
/// condition is `wno − η(P₁) + η(P₂) = 0`, where `η` counts open right
/// half-plane poles. When it fails the value is 1.
pub fn nu_gap<P1: Plant + ?Sized, P2: Plant + ?Sized>(
    p1: &P1,
    p2: &P2,
    grid: &FrequencyGrid,
) -> Result<NuGapResult> {
    if axis_poles(p1) || axis_poles(p2) {
        return Err(Error::Domain(
            "nu-gap requires plants without imaginary-axis poles".into(),
        ));
    }
    let omegas = grid.omegas();
    let mut curve = Vec::with_capacity(omegas.len());
    let mut best = (0usize, -1.0);
    for (i, &w) in omegas.iter().enumerate() {
        let k = kappa(p1.response(w)?, p2.response(w)?);
        if k > best.1 {
            best = (i, k);
        }
        curve.push((w, k));
    }

    let winding_ok = winding_condition(p1, p2, grid)?;
    if !winding_ok {
        return Ok(NuGapResult {
            value: 1.0,
            winding_ok,
            argmax_omega: omegas[best.0],
            kappa_curve: curve,
        });
    }

    let lo = omegas[best.0.saturating_sub(1)];
    let hi = omegas[(best.0 + 1).min(omegas.len() - 1)];
    let (w, k) = golden_max(
        |w| Ok(kappa(p1.response(w)?, p2.response(w)?)),
        lo,
        hi,
        (omegas[best.0], best.1),
    )?;
    Ok(NuGapResult {
        value: k,
        winding_ok,
        argmax_omega: w,
        kappa_curve: curve,
    })
}

fn golden_max(
    f: impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    start: (f64, f64),
) -> Result<(f64, f64)> {
    let mut best = start;
    if hi <= lo {
        return Ok(best);
    }
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1.exp())?;
    let mut f2 = f(x2.exp())?;
    for _ in 0..60 {
        if f1 > best.1 {
            best = (x1.exp(), f1);
        }
        if f2 > best.1 {
            best = (x2.exp(), f2);
        }
        if b - a < 1e-12 {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1.exp())?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2.exp())?;
        }
    }
    Ok(best)
}

fn winding_condition<P1: Plant + ?Sized, P2: Plant + ?Sized>(
    p1: &P1,
    p2: &P2,
    grid: &FrequencyGrid,
) -> Result<bool> {
    let g = |w: f64| -> Result<Complex64> { Ok(1.0 + p2.response(w)?.conj() * p1.response(w)?) };
    let g_inf = 1.0 + p1.high_frequency_gain() * p2.high_frequency_gain();

    // base abscissae: 0, six decades below the grid, the grid, six decades above
    let mut ws = vec![0.0];
    let (lo, hi) = (grid.min(), grid.max());
    for k in (1..=24).rev() {
        ws.push(lo * 10f64.powf(-(k as f64) / 4.0));
    }
    ws.extend_from_slice(grid.omegas());
    for k in 1..=24 {
        ws.push(hi * 10f64.powf(k as f64 / 4.0));
    }

    let mut vals = Vec::with_capacity(ws.len() + 1);
    for &w in &ws {
        vals.push(g(w)?);
    }
    vals.push(Complex64::new(g_inf, 0.0));

    let scale = vals.iter().fold(1.0_f64, |s, z| s.max(z.norm()));
    let mut total = 0.0;
    let mut min_abs = f64::INFINITY;
    for i in 0..ws.len() {
        let (w0, z0) = (ws[i], vals[i]);
        let z1 = vals[i + 1];
        min_abs = min_abs.min(z0.norm()).min(z1.norm());
        if i + 1 == ws.len() {
            // closure at infinity: the last extended point is already in the
            // high-frequency regime
            let step = (z1 / z0).arg();
            if step.abs() >= FRAC_PI_2 {
                return Err(Error::Resolution(
                    "phase jump between the last frequency and infinity".into(),
                ));
            }
            total += step;
            continue;
        }
        let w1 = ws[i + 1];
        match refine_phase(&g, (w0, z0), (w1, z1), 0, &mut min_abs)? {
            Some(step) => total += step,
            // the phase jump survives refinement: 1 + P2*P1 vanishes in between
            None => return Ok(false),
        }
    }
    if min_abs < MIN_RETURN_DIFFERENCE * scale {
        return Ok(false);
    }
    let wno = (total / PI).round() as i64;
    Ok(wno - open_rhp_poles(p1) as i64 + open_rhp_poles(p2) as i64 == 0)
}

fn refine_phase(
    g: &impl Fn(f64) -> Result<Complex64>,
    (w0, z0): (f64, Complex64),
    (w1, z1): (f64, Complex64),
    depth: usize,
    min_abs: &mut f64,
) -> Result<Option<f64>> {
    let step = (z1 / z0).arg();
    if step.abs() < FRAC_PI_4 {
        return Ok(Some(step));
    }
    if depth >= MAX_BISECTIONS {
        return Ok((step.abs() < FRAC_PI_2).then_some(step));
    }
    let wm = if w0 > 0.0 { (w0 * w1).sqrt() } else { 0.5 * w1 };
    let zm = g(wm)?;
    *min_abs = min_abs.min(zm.norm());
    let Some(left) = refine_phase(g, (w0, z0), (wm, zm), depth + 1, min_abs)? else {
        return Ok(None);
    };
    Ok(refine_phase(g, (wm, zm), (w1, z1), depth + 1, min_abs)?.map(|right| left + right))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::RationalTransferFunction;
    use crate::sphere::{chordal_distance, inverse_stereo};

    fn tf(num: &[f64], den: &[f64]) -> RationalTransferFunction {
        RationalTransferFunction::new(num.to_vec(), den.to_vec()).unwrap()
    }

    fn grid() -> FrequencyGrid {
        FrequencyGrid::logspace(1e-3, 1e3, 400).unwrap()
    }

    #[test]
    fn kappa_values() {
        let c = |a: f64| Complex64::new(a, 0.0);
        assert_eq!(kappa(c(2.0), c(2.0)), 0.0);
        assert!((kappa(c(0.0), c(1.0)) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kappa_is_chordal() {
        let p = Complex64::new(0.3, -1.7);
        let q = Complex64::new(-4.0, 0.2);
        let ch = chordal_distance(&inverse_stereo(p).unwrap(), &inverse_stereo(q).unwrap());
        assert!((kappa(p, q) - ch).abs() < 1e-12);
    }

    #[test]
    fn self_distance_zero() {
        let p = tf(&[1.0], &[3.24, 1.26, 1.0]);
        let r = nu_gap(&p, &p, &grid()).unwrap();
        assert!(r.winding_ok);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn constant_plants() {
        let r = nu_gap(
            &RationalTransferFunction::constant(1.0).unwrap(),
            &RationalTransferFunction::constant(0.0).unwrap(),
            &grid(),
        )
        .unwrap();
        assert!(r.winding_ok);
        assert!((r.value - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unstable_pair_satisfies_winding() {
        // 2/(s-1) and 2/(s+1) are both stabilized by unit negative feedback
        let r = nu_gap(&tf(&[2.0], &[-1.0, 1.0]), &tf(&[2.0], &[1.0, 1.0]), &grid()).unwrap();
        assert!(r.winding_ok);
        assert!(r.value < 1.0);
    }

    #[test]
    fn sign_flip_fails_winding() {
        // 1/(s+1) against its negative passes through a zero of 1 + P2*P1 only
        // when |P| ≥ 1; with gain 3 the return difference crosses zero
        let r = nu_gap(&tf(&[3.0], &[1.0, 1.0]), &tf(&[-3.0], &[1.0, 1.0]), &grid()).unwrap();
        assert!(!r.winding_ok);
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn stable_against_unstable_fails() {
        // 1/(s-1) and 1/(s+1) at low gain: not close in the graph topology
        let r = nu_gap(&tf(&[0.2], &[-1.0, 1.0]), &tf(&[0.2], &[1.0, 1.0]), &grid()).unwrap();
        assert!(!r.winding_ok);
    }

    #[test]
    fn refined_peak_at_least_grid_max() {
        let r = nu_gap(
            &tf(&[1.0], &[3.24, 1.26, 1.0]),
            &tf(&[1.0], &[1.44, 1.32, 1.0]),
            &grid(),
        )
        .unwrap();
        let grid_max = r.kappa_curve.iter().map(|p| p.1).fold(0.0, f64::max);
        assert!(r.value >= grid_max);
        assert!(r.value < 0.3822);
    }
}
