//! Command-line driver for `sysdist`: the three demos, manifest runs and
//! one-off distance computations.
//!
//! Exit codes: 0 success, 1 I/O or parse failure, 2 domain error from the
//! numerics, 64 command-line usage error.

pub mod compute;
pub mod manifest;
pub mod run;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use sysdist::grid::FrequencyGrid;
use sysdist::Execution;

use manifest::{ExperimentId, ExperimentManifest, GridSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "sysdist",
    version,
    about = "Distances between stochastic LTI systems"
)]
pub struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Chordal-metric distance between two perturbed first/second-order plants.
    FreqDemo(RunArgs),
    /// Gap-metric distance between two four-parameter state-space families.
    TimeDemo(RunArgs),
    /// Frequency versus time-domain distance on two resonant families.
    CompareDemo(RunArgs),
    /// Run an arbitrary manifest.
    Run(RunArgs),
    /// Single computations on model or ensemble files; prints JSON.
    #[command(subcommand)]
    Compute(ComputeCommand),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// `min:max:M[:log|linear]`
    #[arg(long)]
    pub grid: Option<GridSpec>,
    /// Number of samples per system.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ComputeCommand {
    /// Gap metric between two plant files.
    Gap(PairArgs),
    /// Vinnicombe gap between two plant files.
    Nugap(PairArgs),
    /// Frequency-domain distance between two response or ensemble files.
    FreqDist(PairArgs),
    /// Gap-metric Wasserstein distance between two ensemble files.
    TimeDist(PairArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PairArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// `min:max:M[:log|linear]`
    #[arg(long)]
    pub grid: Option<GridSpec>,
}

impl RunArgs {
    /// Manifest with command-line overrides applied.
    pub fn manifest(&self, default: Option<ExperimentId>) -> Result<ExperimentManifest> {
        let mut m = match (&self.manifest, default) {
            (Some(path), _) => ExperimentManifest::load(path)?,
            (None, Some(id)) => ExperimentManifest::builtin(id)?,
            (None, None) => bail!("--manifest is required"),
        };
        if let Some(id) = default {
            if m.experiment != id {
                bail!("manifest describes {}, not {id}", m.experiment);
            }
        }
        if let Some(s) = self.seed {
            m.seed = s;
        }
        if let Some(q) = self.q {
            m.q = q;
        }
        if let Some(g) = self.grid {
            m.grid = g;
        }
        if let Some(n) = self.samples {
            m.samples = n;
        }
        if let Some(out) = &self.out {
            m.output = out.clone();
        }
        m.validate()?;
        Ok(m)
    }
}

fn build_grid(spec: Option<GridSpec>) -> Result<Option<FrequencyGrid>> {
    spec.map(|g| g.build()).transpose()
}

/// Runs a parsed command, writing results to `out`.
pub fn execute<W: Write>(cli: &Cli, out: &mut W) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let run = |args: &RunArgs, id: Option<ExperimentId>, out: &mut W| -> Result<()> {
        let m = args.manifest(id)?;
        let outcome = run::run_manifest(&m, exec)?;
        writeln!(out, "{}", outcome.summary_line())?;
        Ok(())
    };
    match &cli.command {
        Command::FreqDemo(a) => run(a, Some(ExperimentId::FreqDemo), out),
        Command::TimeDemo(a) => run(a, Some(ExperimentId::TimeDemo), out),
        Command::CompareDemo(a) => run(a, Some(ExperimentId::CompareDemo), out),
        Command::Run(a) => run(a, None, out),
        Command::Compute(c) => {
            let value = match c {
                ComputeCommand::Gap(a) => compute::gap(&a.first, &a.second, build_grid(a.grid)?)?,
                ComputeCommand::Nugap(a) => {
                    compute::nugap(&a.first, &a.second, build_grid(a.grid)?)?
                }
                ComputeCommand::FreqDist(a) => {
                    let grid =
                        build_grid(a.grid)?.unwrap_or(FrequencyGrid::logspace(1e-2, 1e2, 100)?);
                    compute::freq_dist(&a.first, &a.second, &grid, a.q, exec)?
                }
                ComputeCommand::TimeDist(a) => {
                    compute::time_dist(&a.first, &a.second, build_grid(a.grid)?, a.q, exec)?
                }
            };
            writeln!(out, "{}", sysdist::io::to_json_string(&value)?)?;
            Ok(())
        }
    }
}

/// Exit code for a failed run: 2 when a numerical precondition failed,
/// 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let domain = err
        .chain()
        .find_map(|e| e.downcast_ref::<sysdist::Error>())
        .is_some_and(sysdist::Error::is_domain);
    if domain {
        EXIT_DOMAIN
    } else {
        EXIT_IO
    }
}

/// Full entry point: parses `args`, runs, reports errors on stderr and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    EXIT_OK
                }
                _ => {
                    let _ = e.print();
                    EXIT_USAGE
                }
            };
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
