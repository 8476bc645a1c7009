//! Experiment manifests: the JSON files that pin every input of a demo run.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sysdist::grid::FrequencyGrid;
use sysdist::lti::{
    AffineParametricFamily, GaussianParameter, Plant, RationalTransferFunction, StateSpaceModel,
};

/// Manifest schema understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

pub const FREQ_DEMO: &str = include_str!("../manifests/freq-demo.json");
pub const TIME_DEMO: &str = include_str!("../manifests/time-demo.json");
pub const COMPARE_DEMO: &str = include_str!("../manifests/compare-demo.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    FreqDemo,
    TimeDemo,
    CompareDemo,
    Custom,
}

impl ExperimentId {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::FreqDemo => "freq-demo",
            ExperimentId::TimeDemo => "time-demo",
            ExperimentId::CompareDemo => "compare-demo",
            ExperimentId::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

/// `min:max:M:log` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn build(&self) -> Result<FrequencyGrid> {
        ensure!(
            self.min > 0.0 && self.min.is_finite(),
            "grid min must be positive, got {}",
            self.min
        );
        ensure!(
            self.max > self.min && self.max.is_finite(),
            "grid max must exceed min"
        );
        ensure!(self.points >= 1, "grid needs at least one point");
        Ok(match self.spacing {
            Spacing::Log => FrequencyGrid::logspace(self.min, self.max, self.points)?,
            Spacing::Linear => FrequencyGrid::linspace(self.min, self.max, self.points)?,
        })
    }
}

impl FromStr for GridSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        ensure!(
            parts.len() == 3 || parts.len() == 4,
            "expected min:max:M[:log|linear], got {s:?}"
        );
        let spacing = match parts.get(3).copied().unwrap_or("log") {
            "log" => Spacing::Log,
            "linear" | "lin" => Spacing::Linear,
            other => bail!("unknown grid spacing {other:?}"),
        };
        let spec = GridSpec {
            min: parts[0]
                .parse()
                .with_context(|| format!("bad grid min {:?}", parts[0]))?,
            max: parts[1]
                .parse()
                .with_context(|| format!("bad grid max {:?}", parts[1]))?,
            points: parts[2]
                .parse()
                .with_context(|| format!("bad point count {:?}", parts[2]))?,
            spacing,
        };
        spec.build()?;
        Ok(spec)
    }
}

/// How the two ensembles are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// Additive complex Gaussian noise `ρ|P̄(jω)|(x + iy)` on each response.
    Rho(f64),
    /// One Gaussian parameter law per system, pushed through its family.
    Gaussian([GaussianParameter; 2]),
}

/// Where a system comes from. Relative file paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSpec {
    TransferFunction(RationalTransferFunction),
    StateSpace(StateSpaceModel),
    Family(AffineParametricFamily),
    FamilyFile(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzSpec {
    #[default]
    Skip,
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub schema_version: u32,
    pub experiment: ExperimentId,
    /// System `i` draws from stream `seed + i`.
    pub seed: u64,
    /// Frequency grid for responses and curves.
    pub grid: GridSpec,
    /// Grid of the gap solver; the solver default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_grid: Option<GridSpec>,
    pub samples: usize,
    pub q: f64,
    pub perturbation: Perturbation,
    pub systems: [SystemSpec; 2],
    #[serde(default)]
    pub lipschitz: LipschitzSpec,
    pub output: PathBuf,
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

impl ExperimentManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).context("invalid manifest")?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        let mut m = Self::from_json(&text).with_context(|| format!("in {}", path.display()))?;
        m.base_dir = path.parent().map(Path::to_path_buf);
        Ok(m)
    }

    /// Built-in manifest of one of the three demos.
    pub fn builtin(id: ExperimentId) -> Result<Self> {
        match id {
            ExperimentId::FreqDemo => Self::from_json(FREQ_DEMO),
            ExperimentId::TimeDemo => Self::from_json(TIME_DEMO),
            ExperimentId::CompareDemo => Self::from_json(COMPARE_DEMO),
            ExperimentId::Custom => bail!("custom experiments need a manifest file"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            self.schema_version
        );
        self.grid.build()?;
        if let Some(g) = &self.gap_grid {
            g.build()?;
        }
        ensure!(self.samples >= 1, "samples must be at least 1");
        ensure!(
            self.q >= 1.0 && self.q.is_finite(),
            "q must be a finite number >= 1"
        );
        match (&self.perturbation, self.experiment) {
            (Perturbation::Rho(r), ExperimentId::FreqDemo | ExperimentId::Custom) => {
                ensure!(*r >= 0.0 && r.is_finite(), "rho must be nonnegative");
            }
            (
                Perturbation::Gaussian(_),
                ExperimentId::TimeDemo | ExperimentId::CompareDemo | ExperimentId::Custom,
            ) => {}
            (_, id) => bail!("perturbation kind does not fit experiment {id}"),
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// System `i` as a parametric family; fixed models become families with
    /// no directions.
    pub fn family(&self, i: usize) -> Result<AffineParametricFamily> {
        Ok(match &self.systems[i] {
            SystemSpec::TransferFunction(tf) => AffineParametricFamily::fixed(tf.to_state_space()?),
            SystemSpec::StateSpace(m) => AffineParametricFamily::fixed(m.clone()),
            SystemSpec::Family(f) => f.clone(),
            SystemSpec::FamilyFile(p) => {
                let path = self.resolve(p);
                let text = fs::read_to_string(&path)
                    .with_context(|| format!("cannot read family {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("invalid family in {}", path.display()))?
            }
        })
    }

    /// Nominal plant of system `i`.
    pub fn plant(&self, i: usize) -> Result<Box<dyn Plant>> {
        Ok(match &self.systems[i] {
            SystemSpec::TransferFunction(tf) => Box::new(tf.clone()),
            SystemSpec::StateSpace(m) => Box::new(m.clone()),
            _ => Box::new(self.family(i)?.nominal()?),
        })
    }

    pub fn system_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_flag() {
        let g: GridSpec = "0.1:1000:50:log".parse().unwrap();
        assert_eq!(g.points, 50);
        assert_eq!(g.spacing, Spacing::Log);
        assert!("1:0.5:10".parse::<GridSpec>().is_err());
        assert!("1:2:10:cubic".parse::<GridSpec>().is_err());
    }

    #[test]
    fn builtins_parse() {
        for id in [
            ExperimentId::FreqDemo,
            ExperimentId::TimeDemo,
            ExperimentId::CompareDemo,
        ] {
            let m = ExperimentManifest::builtin(id).unwrap();
            assert_eq!(m.experiment, id);
            m.family(0).unwrap();
            m.family(1).unwrap();
        }
    }

    #[test]
    fn wrong_perturbation_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(FREQ_DEMO).unwrap();
        v["experiment"] = "time-demo".into();
        assert!(ExperimentManifest::from_json(&v.to_string()).is_err());
    }
}
