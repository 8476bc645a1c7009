//! Generalized stability margin `b_{P,C}` of a plant and controller in positive
//! feedback.

use std::ops::AddAssign;

use nalgebra::DMatrix;
use serde::Serialize;

use super::hinf::hinf_norm;
use crate::error::{Error, Result};
use crate::lti::Realization;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityMargin {
    /// `1 / ‖[P; 1](1 − CP)⁻¹[−C 1]‖∞`, or 0 when the loop is not stabilizing.
    pub value: f64,
    pub stabilizing: bool,
}

/// Closed-loop map `(v₁, v₂) ↦ (y, u)` for `y = P u`, `u = v₂ + C(y − v₁)`,
/// whose transfer matrix is `[P; 1](1 − CP)⁻¹[−C 1]`. `None` when the loop is
/// ill-posed (`1 − D_C D_P = 0`).
fn closed_loop(p: &Realization, c: &Realization) -> Option<Realization> {
    let (np, nc) = (p.order(), c.order());
    let (dp, dc) = (p.d[(0, 0)], c.d[(0, 0)]);
    let e = 1.0 - dc * dp;
    if e.abs() < 1e-12 {
        return None;
    }
    let n = np + nc;
    // u = (v2 − dc v1 + Cc xc + dc Cp xp) / e
    let mut u_x = DMatrix::zeros(1, n);
    u_x.view_mut((0, 0), (1, np)).copy_from(&(&p.c * (dc / e)));
    u_x.view_mut((0, np), (1, nc)).copy_from(&(&c.c / e));
    let u_v = DMatrix::from_row_slice(1, 2, &[-dc / e, 1.0 / e]);
    // y = Cp xp + dp u
    let mut y_x = &u_x * dp;
    y_x.view_mut((0, 0), (1, np)).add_assign(&p.c);
    let y_v = &u_v * dp;

    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, 2);
    // xp' = Ap xp + Bp u
    a.view_mut((0, 0), (np, np)).copy_from(&p.a);
    a.view_mut((0, 0), (np, n)).add_assign(&(&p.b * &u_x));
    b.view_mut((0, 0), (np, 2)).copy_from(&(&p.b * &u_v));
    // xc' = Ac xc + Bc (y − v1)
    a.view_mut((np, np), (nc, nc)).copy_from(&c.a);
    a.view_mut((np, 0), (nc, n)).add_assign(&(&c.b * &y_x));
    let mut yv1 = y_v.clone();
    yv1[(0, 0)] -= 1.0;
    b.view_mut((np, 0), (nc, 2)).copy_from(&(&c.b * yv1));

    let mut cc = DMatrix::zeros(2, n);
    cc.row_mut(0).copy_from(&y_x.row(0));
    cc.row_mut(1).copy_from(&u_x.row(0));
    let mut d = DMatrix::zeros(2, 2);
    d.row_mut(0).copy_from(&y_v.row(0));
    d.row_mut(1).copy_from(&u_v.row(0));
    Some(Realization { a, b, c: cc, d })
}

/// `b_{P,C}` for SISO plant and controller realizations.
pub fn bpc(p: &Realization, c: &Realization) -> Result<StabilityMargin> {
    for (name, r) in [("plant", p), ("controller", c)] {
        if r.inputs() != 1 || r.outputs() != 1 {
            return Err(Error::Dimension(format!("{name} must be SISO")));
        }
    }
    let unstable = StabilityMargin {
        value: 0.0,
        stabilizing: false,
    };
    let Some(cl) = closed_loop(p, c) else {
        return Ok(unstable);
    };
    if !cl.is_stable() {
        return Ok(unstable);
    }
    let norm = hinf_norm(&cl)?.value;
    Ok(StabilityMargin {
        value: (1.0 / norm).min(1.0),
        stabilizing: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::RationalTransferFunction;
    use num_complex::Complex64;

    fn tf(num: &[f64], den: &[f64]) -> Realization {
        RationalTransferFunction::new(num.to_vec(), den.to_vec())
            .unwrap()
            .realize()
    }

    #[test]
    fn zero_plant_zero_controller() {
        let z = tf(&[0.0], &[1.0]);
        let b = bpc(&z, &z).unwrap();
        assert!(b.stabilizing);
        assert!((b.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integrator_with_unit_negative_feedback() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let p = Realization {
            a: DMatrix::zeros(1, 1),
            b: one.clone(),
            c: one,
            d: DMatrix::zeros(1, 1),
        };
        let c = tf(&[-1.0], &[1.0]);
        let b = bpc(&p, &c).unwrap();
        assert!(b.stabilizing);
        // σ(ω) = √(1+|P|²)√(1+|C|²)/|1−CP|
        let sweep = (0..200_000)
            .map(|k| 10f64.powf(-4.0 + 8.0 * k as f64 / 199_999.0))
            .map(|w| {
                let pw = 1.0 / Complex64::new(0.0, w);
                let cw = Complex64::new(-1.0, 0.0);
                (1.0 + pw.norm_sqr()).sqrt() * (1.0 + cw.norm_sqr()).sqrt() / (1.0 - cw * pw).norm()
            })
            .fold(0.0, f64::max);
        assert!(
            (b.value - 1.0 / sweep).abs() < 1e-5,
            "{} vs {}",
            b.value,
            1.0 / sweep
        );
    }

    #[test]
    fn destabilizing_controller_flagged() {
        let p = tf(&[1.0], &[1.0, 1.0]);
        let c = tf(&[2.0], &[1.0]);
        let b = bpc(&p, &c).unwrap();
        assert!(!b.stabilizing);
        assert_eq!(b.value, 0.0);
    }
}
