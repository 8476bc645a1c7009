//! One-off computations on model and ensemble files.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use sysdist::distances::{freq_distance, FrequencyEnsemble, GapCache, Lipschitz, TimeOptions};
use sysdist::gap::{nu_gap, GapConfig, GapSolver};
use sysdist::grid::FrequencyGrid;
use sysdist::lti::{Plant, RationalTransferFunction, StateSpaceModel, SystemEnsemble};
use sysdist::Execution;

/// A plant file holds either `{"A","B","C","D"}` or `{"num","den"}`.
#[derive(Debug, Clone)]
pub enum PlantFile {
    StateSpace(StateSpaceModel),
    Transfer(RationalTransferFunction),
}

impl PlantFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        let is_tf = serde_json::from_str::<Value>(&text)
            .with_context(|| format!("cannot parse {}", path.display()))?
            .get("num")
            .is_some();
        if is_tf {
            Ok(Self::Transfer(parse(path, &text)?))
        } else {
            Ok(Self::StateSpace(parse(path, &text)?))
        }
    }

    pub fn plant(&self) -> &dyn Plant {
        match self {
            Self::StateSpace(m) => m,
            Self::Transfer(tf) => tf,
        }
    }

    pub fn state_space(&self) -> Result<StateSpaceModel> {
        match self {
            Self::StateSpace(m) => Ok(m.clone()),
            Self::Transfer(tf) => Ok(tf.to_state_space()?),
        }
    }
}

/// Frequency-domain input: sampled responses, or an ensemble of models to be
/// evaluated on a grid.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum ResponseFile {
    Responses(FrequencyEnsemble),
    Models(SystemEnsemble),
}

impl ResponseFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read(path)?;
        let has_grid = serde_json::from_str::<Value>(&text)
            .with_context(|| format!("cannot parse {}", path.display()))?
            .get("grid")
            .is_some();
        if has_grid {
            Ok(Self::Responses(parse(path, &text)?))
        } else {
            Ok(Self::Models(parse(path, &text)?))
        }
    }

    fn evaluate(self, grid: &FrequencyGrid) -> Result<FrequencyEnsemble> {
        match self {
            Self::Responses(fe) => Ok(fe),
            Self::Models(e) => Ok(FrequencyEnsemble::from_models(
                grid,
                e.models(),
                Some(&e.family().nominal()?),
            )?),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Deserializes with serde_json's positioned diagnostics (`line L column C`).
pub fn parse<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).with_context(|| format!("cannot parse {}", path.display()))
}

pub fn gap(a: &Path, b: &Path, grid: Option<FrequencyGrid>) -> Result<Value> {
    let mut config = GapConfig::default();
    if let Some(g) = grid {
        config.grid = g;
    }
    let solver = GapSolver::new(config)?;
    let (p1, p2) = (
        PlantFile::load(a)?.state_space()?,
        PlantFile::load(b)?.state_space()?,
    );
    let r = solver.gap_models(&p1, &p2)?;
    Ok(json!({
        "gap": r.value,
        "directed_12": r.directed_12,
        "directed_21": r.directed_21,
        "diagnostics": r.diagnostics,
    }))
}

pub fn nugap(a: &Path, b: &Path, grid: Option<FrequencyGrid>) -> Result<Value> {
    let grid = grid.unwrap_or_else(|| GapConfig::default().grid);
    let (p1, p2) = (PlantFile::load(a)?, PlantFile::load(b)?);
    let r = nu_gap(p1.plant(), p2.plant(), &grid)?;
    Ok(json!({
        "nugap": r.value,
        "winding_ok": r.winding_ok,
        "argmax_omega": r.argmax_omega,
    }))
}

pub fn freq_dist(
    a: &Path,
    b: &Path,
    grid: &FrequencyGrid,
    q: f64,
    exec: Execution,
) -> Result<Value> {
    let fe1 = ResponseFile::load(a)?.evaluate(grid)?;
    let fe2 = ResponseFile::load(b)?.evaluate(grid)?;
    let r = freq_distance(&fe1, &fe2, q, exec)?;
    Ok(json!({ "freq_dist": r.value, "report": r }))
}

pub fn time_dist(
    a: &Path,
    b: &Path,
    grid: Option<FrequencyGrid>,
    q: f64,
    exec: Execution,
) -> Result<Value> {
    let load = |p: &Path| -> Result<SystemEnsemble> { parse(p, &read(p)?) };
    let (e1, e2) = (load(a)?, load(b)?);
    let mut config = GapConfig::default();
    if let Some(g) = grid {
        config.grid = g;
    }
    let solver = GapSolver::new(config)?;
    let cache = GapCache::new(&solver, &e1, &e2, exec)?;
    let r = cache.report(
        &solver,
        &TimeOptions {
            q,
            lipschitz: Lipschitz::Skip,
        },
        Some(e1.seed()),
        exec,
    )?;
    Ok(json!({ "time_dist": r.value, "report": r }))
}
