//! The Riemann sphere of unit diameter resting on the complex plane at the
//! origin: stereographic projection, chordal and geodesic metrics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Centre of the sphere, `(0, 0, 1/2)`.
pub const CENTER: [f64; 3] = [0.0, 0.0, 0.5];
pub const SOUTH_POLE: SpherePoint = SpherePoint {
    x: 0.0,
    y: 0.0,
    z: 0.0,
};
pub const NORTH_POLE: SpherePoint = SpherePoint {
    x: 0.0,
    y: 0.0,
    z: 1.0,
};

const ON_SPHERE_TOL: f64 = 1e-10;

/// Point on the sphere `x² + y² + (z - 1/2)² = 1/4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SpherePoint {
    /// Wraps raw coordinates, pulling them radially back onto the sphere when
    /// they have drifted by more than `1e-10`.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let p = Self { x, y, z };
        let r = p.radius();
        if !r.is_finite() || r == 0.0 {
            return Err(Error::InvalidArgument(
                "point has no radial direction from the centre".into(),
            ));
        }
        if (r - 0.5).abs() > ON_SPHERE_TOL {
            return Ok(p.renormalized());
        }
        Ok(p)
    }

    /// Distance from the centre of the sphere.
    pub fn radius(&self) -> f64 {
        (self.x * self.x + self.y * self.y + (self.z - CENTER[2]).powi(2)).sqrt()
    }

    /// Deviation from the sphere equation.
    pub fn sphere_residual(&self) -> f64 {
        self.x * self.x + self.y * self.y + (self.z - CENTER[2]).powi(2) - 0.25
    }

    pub fn renormalized(&self) -> Self {
        let r = self.radius();
        let k = 0.5 / r;
        Self {
            x: self.x * k,
            y: self.y * k,
            z: CENTER[2] + (self.z - CENTER[2]) * k,
        }
    }

    fn sub(&self, other: &Self) -> [f64; 3] {
        [self.x - other.x, self.y - other.y, self.z - other.z]
    }
}

/// Inverse stereographic projection `c ↦ (Re c, Im c, |c|²) / (1 + |c|²)`.
pub fn inverse_stereo(c: Complex64) -> Result<SpherePoint> {
    if !c.re.is_finite() || !c.im.is_finite() {
        return Err(Error::InvalidArgument(
            "cannot project a non-finite complex number".into(),
        ));
    }
    Ok(inverse_stereo_unchecked(c))
}

#[inline]
pub(crate) fn inverse_stereo_unchecked(c: Complex64) -> SpherePoint {
    let r2 = c.norm_sqr();
    let den = 1.0 + r2;
    SpherePoint {
        x: c.re / den,
        y: c.im / den,
        z: r2 / den,
    }
}

/// Stereographic projection from the north pole onto the plane `z = 0`.
///
/// On the upper hemisphere `1 − z` cancels, so there the equivalent
/// `(x + iy)·z / (x² + y²)` is used; it keeps full relative precision for
/// large `|c|`.
pub fn stereo(p: &SpherePoint) -> Result<Complex64> {
    if p.z <= 0.5 {
        let k = 1.0 / (1.0 - p.z);
        return Ok(Complex64::new(p.x * k, p.y * k));
    }
    let r2 = p.x * p.x + p.y * p.y;
    let k = p.z / r2;
    if !k.is_finite() {
        return Err(Error::PointAtInfinity);
    }
    Ok(Complex64::new(p.x * k, p.y * k))
}

/// Straight-line distance through the sphere; lies in `[0, 1]`.
#[inline]
pub fn chordal_distance(r1: &SpherePoint, r2: &SpherePoint) -> f64 {
    let [dx, dy, dz] = r1.sub(r2);
    (dx * dx + dy * dy + dz * dz).sqrt().min(1.0)
}

/// Great-circle distance on the sphere of radius 1/2; lies in `[0, π/2]`.
///
/// Half the central angle `∠(r1 - centre, r2 - centre)`, evaluated as
/// `atan2(|u×v|, u·v)` rather than `arccos(4 u·v)` so that nearly coincident
/// and nearly antipodal pairs keep full precision.
pub fn geodesic_distance(r1: &SpherePoint, r2: &SpherePoint) -> f64 {
    let u = [r1.x - CENTER[0], r1.y - CENTER[1], r1.z - CENTER[2]];
    let v = [r2.x - CENTER[0], r2.y - CENTER[1], r2.z - CENTER[2]];
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let cross = [
        u[1] * v[2] - u[2] * v[1],
        u[2] * v[0] - u[0] * v[2],
        u[0] * v[1] - u[1] * v[0],
    ];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    0.5 * sin.atan2(dot).clamp(0.0, std::f64::consts::PI)
}

/// Factor relating the planar and spherical densities of a projected law at
/// `c`: `(r + r³) / 2` with `r = |c|`.
pub fn sphere_density_factor(c: Complex64) -> Result<f64> {
    if !c.re.is_finite() || !c.im.is_finite() {
        return Err(Error::InvalidArgument(
            "density factor of a non-finite point".into(),
        ));
    }
    let r = c.norm();
    Ok((r + r * r * r) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn poles_and_unit_points() {
        assert_eq!(inverse_stereo(c(0.0, 0.0)).unwrap(), SOUTH_POLE);
        assert_eq!(
            inverse_stereo(c(1.0, 0.0)).unwrap(),
            SpherePoint {
                x: 0.5,
                y: 0.0,
                z: 0.5
            }
        );
        assert_eq!(
            inverse_stereo(c(0.0, 1.0)).unwrap(),
            SpherePoint {
                x: 0.0,
                y: 0.5,
                z: 0.5
            }
        );
        assert_eq!(stereo(&SOUTH_POLE).unwrap(), c(0.0, 0.0));
        assert_eq!(
            stereo(&SpherePoint {
                x: 0.5,
                y: 0.0,
                z: 0.5
            })
            .unwrap(),
            c(1.0, 0.0)
        );
        assert_eq!(stereo(&NORTH_POLE), Err(Error::PointAtInfinity));
        assert!(inverse_stereo(c(f64::NAN, 0.0)).is_err());
    }

    #[test]
    fn pole_distances() {
        assert_eq!(chordal_distance(&SOUTH_POLE, &NORTH_POLE), 1.0);
        assert!(
            (geodesic_distance(&SOUTH_POLE, &NORTH_POLE) - std::f64::consts::FRAC_PI_2).abs()
                < 1e-15
        );
        let p = inverse_stereo(c(0.3, -2.0)).unwrap();
        assert_eq!(chordal_distance(&p, &p), 0.0);
        assert_eq!(geodesic_distance(&p, &p), 0.0);
    }

    #[test]
    fn density_factor_values() {
        assert_eq!(sphere_density_factor(c(0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(sphere_density_factor(c(1.0, 0.0)).unwrap(), 1.0);
        assert_eq!(sphere_density_factor(c(0.0, 2.0)).unwrap(), 5.0);
    }

    #[test]
    fn drifted_point_renormalized() {
        let p = SpherePoint::new(0.6, 0.0, 0.5).unwrap();
        assert!(p.sphere_residual().abs() < 1e-15);
        assert!((p.x - 0.5).abs() < 1e-15);
    }

    fn complex() -> impl Strategy<Value = Complex64> {
        (-1e3..1e3f64, -1e3..1e3f64).prop_map(|(a, b)| Complex64::new(a, b))
    }

    proptest! {
        #[test]
        fn projection_lands_on_sphere(z in complex()) {
            let p = inverse_stereo(z).unwrap();
            prop_assert!(p.sphere_residual().abs() < 1e-12);
            prop_assert!(p.z < 1.0);
        }

        #[test]
        fn chordal_is_sine_of_geodesic(a in complex(), b in complex()) {
            let (p, q) = (inverse_stereo(a).unwrap(), inverse_stereo(b).unwrap());
            let ch = chordal_distance(&p, &q);
            let geo = geodesic_distance(&p, &q);
            prop_assert!((ch - geo.sin()).abs() < 1e-12);
            prop_assert!(ch <= geo + 1e-15);
            prop_assert!((0.0..=1.0).contains(&ch));
            prop_assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&geo));
        }

        #[test]
        fn chordal_metric_axioms(a in complex(), b in complex(), c in complex()) {
            let (p, q, r) = (inverse_stereo(a).unwrap(), inverse_stereo(b).unwrap(), inverse_stereo(c).unwrap());
            prop_assert_eq!(chordal_distance(&p, &q), chordal_distance(&q, &p));
            prop_assert!(chordal_distance(&p, &r) <= chordal_distance(&p, &q) + chordal_distance(&q, &r) + 1e-15);
        }

        #[test]
        fn round_trip_keeps_relative_precision(e in -8.0..8.0f64, phase in -3.2..3.2f64) {
            let z = Complex64::from_polar(10f64.powf(e), phase);
            let back = stereo(&inverse_stereo(z).unwrap()).unwrap();
            prop_assert!((back - z).norm() <= 1e-14 * z.norm().max(1e-300));
        }
    }
}
