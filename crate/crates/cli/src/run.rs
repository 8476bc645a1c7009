//! Demo drivers: each turns a manifest into `report.json`, `curves.csv` and
//! `summary.txt` in the output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sysdist::distances::{
    comparison_check_with, freq_distance, ComparisonRecord, DistanceReport, FrequencyEnsemble,
    GapCache, Lipschitz, TimeOptions,
};
use sysdist::gap::{kappa, GapConfig, GapSolver};
use sysdist::io::{fmt_f64, to_json_writer};
use sysdist::lti::{sample_ensemble, SystemEnsemble};
use sysdist::Execution;

use crate::manifest::{ExperimentId, ExperimentManifest, LipschitzSpec, Perturbation};

/// Result of one manifest run.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
pub enum Outcome {
    Distance(DistanceReport),
    Comparison(ComparisonRecord),
}

#[derive(Debug, Clone, Serialize)]
struct ReportFile<'a> {
    experiment: ExperimentId,
    seed: u64,
    q: f64,
    samples: usize,
    result: &'a Outcome,
}

impl Outcome {
    pub fn summary_line(&self) -> String {
        match self {
            Outcome::Distance(r) => r.summary_line(),
            Outcome::Comparison(c) => format!(
                "d_freq={:.4} d_time={:.4} nominal_gap={:.4} holds={}",
                c.d_freq, c.d_time, c.nominal_gap, c.holds
            ),
        }
    }
}

/// Runs the manifest and writes its files. Returns the outcome.
pub fn run_manifest(m: &ExperimentManifest, exec: Execution) -> Result<Outcome> {
    let outcome = match (&m.perturbation, m.experiment) {
        (Perturbation::Rho(rho), _) => Outcome::Distance(run_freq(m, *rho, exec)?),
        (Perturbation::Gaussian(_), ExperimentId::TimeDemo) => {
            Outcome::Distance(run_time(m, exec)?)
        }
        (Perturbation::Gaussian(_), _) => Outcome::Comparison(run_compare(m, exec)?),
    };
    write_outputs(m, &outcome)?;
    Ok(outcome)
}

pub fn run_freq_demo(m: &ExperimentManifest, exec: Execution) -> Result<DistanceReport> {
    expect_distance(run_manifest(m, exec)?)
}

pub fn run_time_demo(m: &ExperimentManifest, exec: Execution) -> Result<DistanceReport> {
    expect_distance(run_manifest(m, exec)?)
}

fn expect_distance(o: Outcome) -> Result<DistanceReport> {
    match o {
        Outcome::Distance(r) => Ok(r),
        Outcome::Comparison(_) => anyhow::bail!("manifest describes a comparison run"),
    }
}

pub fn run_compare_demo(m: &ExperimentManifest, exec: Execution) -> Result<ComparisonRecord> {
    match run_manifest(m, exec)? {
        Outcome::Comparison(c) => Ok(c),
        Outcome::Distance(_) => anyhow::bail!("manifest describes a single-distance run"),
    }
}

fn run_freq(m: &ExperimentManifest, rho: f64, exec: Execution) -> Result<DistanceReport> {
    let grid = m.grid.build()?;
    let p1 = m.plant(0)?;
    let p2 = m.plant(1)?;
    let fe1 = FrequencyEnsemble::perturbed(&grid, p1.as_ref(), m.samples, rho, m.system_seed(0))?;
    let fe2 = FrequencyEnsemble::perturbed(&grid, p2.as_ref(), m.samples, rho, m.system_seed(1))?;
    let mut r = freq_distance(&fe1, &fe2, m.q, exec)?;
    r.seed = Some(m.seed);
    Ok(r)
}

fn ensembles(m: &ExperimentManifest) -> Result<(SystemEnsemble, SystemEnsemble)> {
    let Perturbation::Gaussian(params) = &m.perturbation else {
        anyhow::bail!("time-domain runs need Gaussian parameter blocks");
    };
    let e1 = sample_ensemble(&m.family(0)?, &params[0], m.samples, m.system_seed(0))?;
    let e2 = sample_ensemble(&m.family(1)?, &params[1], m.samples, m.system_seed(1))?;
    Ok((e1, e2))
}

fn solver(m: &ExperimentManifest) -> Result<GapSolver> {
    let mut config = GapConfig::default();
    if let Some(g) = &m.gap_grid {
        config.grid = g.build()?;
    }
    Ok(GapSolver::new(config)?)
}

fn run_time(m: &ExperimentManifest, exec: Execution) -> Result<DistanceReport> {
    let (e1, e2) = ensembles(m)?;
    let solver = solver(m)?;
    let cache = GapCache::new(&solver, &e1, &e2, exec)?;
    let lipschitz = match m.lipschitz {
        LipschitzSpec::Skip => Lipschitz::Skip,
        LipschitzSpec::Estimate => Lipschitz::Estimate,
    };
    Ok(cache.report(
        &solver,
        &TimeOptions { q: m.q, lipschitz },
        Some(m.seed),
        exec,
    )?)
}

fn run_compare(m: &ExperimentManifest, exec: Execution) -> Result<ComparisonRecord> {
    let (e1, e2) = ensembles(m)?;
    let mut rec = comparison_check_with(&solver(m)?, &e1, &e2, &m.grid.build()?, m.q, exec)?;
    rec.frequency.seed = Some(m.seed);
    rec.time.seed = Some(m.seed);
    Ok(rec)
}

fn write_outputs(m: &ExperimentManifest, outcome: &Outcome) -> Result<()> {
    let dir = &m.output;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;

    let report = ReportFile {
        experiment: m.experiment,
        seed: m.seed,
        q: m.q,
        samples: m.samples,
        result: outcome,
    };
    let mut w = create(&dir.join("report.json"))?;
    to_json_writer(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;

    let mut w = create(&dir.join("curves.csv"))?;
    match outcome {
        Outcome::Distance(r) if r.per_frequency.is_some() => r.write_csv(&mut w)?,
        Outcome::Comparison(c) => c.frequency.write_csv(&mut w)?,
        Outcome::Distance(_) => write_nominal_curve(m, &mut w)?,
    }
    w.flush()?;

    let mut w = create(&dir.join("summary.txt"))?;
    writeln!(w, "{}", outcome.summary_line())?;
    w.flush()?;
    Ok(())
}

/// Chordal distance between the two nominal responses, for runs that have no
/// per-frequency distance of their own.
fn write_nominal_curve<W: Write>(m: &ExperimentManifest, mut w: W) -> Result<()> {
    let grid = m.grid.build()?;
    let (p1, p2) = (m.plant(0)?, m.plant(1)?);
    writeln!(w, "omega,kappa_nominal")?;
    for &omega in grid.omegas() {
        let k = kappa(p1.response(omega)?, p2.response(omega)?);
        writeln!(w, "{},{}", fmt_f64(omega), fmt_f64(k))?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}
