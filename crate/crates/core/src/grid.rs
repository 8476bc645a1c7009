use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing, positive, finite frequencies in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

impl TryFrom<Vec<f64>> for FrequencyGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FrequencyGrid> for Vec<f64> {
    fn from(g: FrequencyGrid) -> Self {
        g.omegas
    }
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.len() < 2 {
            return Err(Error::InvalidArgument(
                "frequency grid needs at least two points".into(),
            ));
        }
        if omegas.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::InvalidArgument(
                "frequencies must be finite and positive".into(),
            ));
        }
        if omegas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self { omegas })
    }

    /// `m` points spaced evenly in `log10` between `min` and `max` inclusive.
    pub fn logspace(min: f64, max: f64, m: usize) -> Result<Self> {
        if !(min > 0.0 && max > min) || m < 2 {
            return Err(Error::InvalidArgument(format!(
                "bad log grid {min}:{max}:{m}"
            )));
        }
        let (a, b) = (min.log10(), max.log10());
        let step = (b - a) / (m - 1) as f64;
        let mut omegas: Vec<f64> = (0..m).map(|k| 10f64.powf(a + step * k as f64)).collect();
        omegas[0] = min;
        omegas[m - 1] = max;
        Self::new(omegas)
    }

    pub fn linspace(min: f64, max: f64, m: usize) -> Result<Self> {
        if !(min > 0.0 && max > min) || m < 2 {
            return Err(Error::InvalidArgument(format!(
                "bad linear grid {min}:{max}:{m}"
            )));
        }
        let step = (max - min) / (m - 1) as f64;
        let mut omegas: Vec<f64> = (0..m).map(|k| min + step * k as f64).collect();
        omegas[m - 1] = max;
        Self::new(omegas)
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }
    pub fn len(&self) -> usize {
        self.omegas.len()
    }
    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
    pub fn min(&self) -> f64 {
        self.omegas[0]
    }
    pub fn max(&self) -> f64 {
        self.omegas[self.omegas.len() - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logspace_endpoints() {
        let g = FrequencyGrid::logspace(1e-2, 1e2, 100).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g.min(), 1e-2);
        assert_eq!(g.max(), 1e2);
        assert!((g.omegas()[50] / g.omegas()[49] - 10f64.powf(4.0 / 99.0)).abs() < 1e-12);
    }

    #[test]
    fn invalid_grids() {
        assert!(FrequencyGrid::new(vec![1.0]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 1.0]).is_err());
        assert!(FrequencyGrid::logspace(1.0, 0.5, 10).is_err());
    }
}
