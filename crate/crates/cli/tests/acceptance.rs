//! Acceptance criteria 1 to 10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{ensure, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use sysdist::distances::{comparison_check_with, DistanceReport, FREQ_SANDWICH_TOL};
use sysdist::gap::{gap_metric, kappa, nrcf, nu_gap, GapConfig, GapSolver};
use sysdist::grid::FrequencyGrid;
use sysdist::lti::{
    random_directions, sample_ensemble, AffineParametricFamily, GaussianParameter,
    RationalTransferFunction, StateSpaceModel,
};
use sysdist::sphere::{chordal_distance, inverse_stereo, stereo};
use sysdist::transport::{
    max_cost_coupling, min_cost_coupling, CostKind, CostMatrix, EmpiricalMeasure,
};
use sysdist::Execution;
use sysdist_cli::manifest::{ExperimentId, ExperimentManifest};
use sysdist_cli::run::{run_compare_demo, run_freq_demo, run_time_demo};

const GAP_TOL: f64 = 5e-3;
const THM_TOL: f64 = 2e-3;
/// Slack of a time-domain sandwich: twice the gap solver tolerance.
const TIME_SLACK: f64 = 1e-3;

struct Outcome {
    id: u8,
    name: &'static str,
    result: Result<String>,
    elapsed: Duration,
}

fn criterion(
    id: u8,
    name: &'static str,
    budget: Duration,
    f: impl FnOnce() -> Result<String>,
) -> Outcome {
    let start = Instant::now();
    let mut result = f();
    let elapsed = start.elapsed();
    if result.is_ok() && elapsed > budget {
        result = Err(anyhow::anyhow!("took {elapsed:.1?}, budget {budget:?}"));
    }
    let line = match &result {
        Ok(detail) => format!("[PASS] {id:>2} {name}: {detail} ({elapsed:.1?})"),
        Err(e) => format!("[FAIL] {id:>2} {name}: {e:#} ({elapsed:.1?})"),
    };
    println!("{line}");
    Outcome {
        id,
        name,
        result,
        elapsed,
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn randn(rng: &mut ChaCha20Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// Random SISO model whose poles sit a random margin from `margins` left of
/// the axis.
fn random_stable(
    rng: &mut ChaCha20Rng,
    n: usize,
    margins: std::ops::Range<f64>,
) -> StateSpaceModel {
    let margin = rng.random_range(margins);
    let a = randn(rng, n, n);
    let shift = a
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
        + margin;
    let a = a - DMatrix::identity(n, n) * shift;
    StateSpaceModel::new(a, randn(rng, n, 1), randn(rng, 1, n), 0.0).unwrap()
}

fn sandwich_ok(r: &DistanceReport, tol: f64) -> bool {
    r.lower_bound.is_none_or(|lb| lb <= r.value + tol)
        && r.upper_bound.is_none_or(|ub| r.value <= ub + tol)
}

fn second_order(a0: f64, a1: f64) -> StateSpaceModel {
    StateSpaceModel::from_rows(&[&[0.0, 1.0], &[-a0, -a1]], &[0.0, 1.0], &[1.0, 0.0], 0.0).unwrap()
}

fn within(name: &str, value: f64, target: f64, band: f64) -> Result<String> {
    ensure!(
        (value - target).abs() <= band,
        "{name} = {value:.4} outside {target} ± {band}"
    );
    Ok(format!("{name}={value:.4}"))
}

/// Demo runs shared between criteria 4, 5 and 10.
struct DemoRuns {
    freq: DistanceReport,
    time: DistanceReport,
    compare: sysdist::distances::ComparisonRecord,
}

fn demo_manifest(id: ExperimentId, out: &Path) -> ExperimentManifest {
    let mut m = ExperimentManifest::builtin(id).unwrap();
    m.output = out.join(id.as_str());
    m
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let mut outcomes = Vec::new();
    let mut sweep_reports: Vec<DistanceReport> = Vec::new();
    let mut demos: Option<DemoRuns> = None;

    outcomes.push(criterion(
        1,
        "nominal gap, fourth-order state-space pair",
        secs(30),
        || {
            let p1 = StateSpaceModel::from_rows(
                &[&[0.0, 1.0], &[-2.0, -0.5]],
                &[0.0, 1.0],
                &[1.0, 0.0],
                0.0,
            )?;
            let p2 = StateSpaceModel::from_rows(
                &[&[-3.2178, 1.2354], &[-1.7812, -2.6507]],
                &[0.0, 1.0],
                &[1.0, 0.0],
                0.0,
            )?;
            within("gap", gap_metric(&p1, &p2)?.value, 0.7731, GAP_TOL)
        },
    ));

    outcomes.push(criterion(2, "nominal gap, resonant pair", secs(30), || {
        within(
            "gap",
            gap_metric(&second_order(3.24, 1.26), &second_order(1.44, 1.32))?.value,
            0.3822,
            GAP_TOL,
        )
    }));

    // The demos feed criteria 3, 4, 5 and 10; run them once up front.
    let demo_start = Instant::now();
    let demo_result: Result<DemoRuns> = (|| {
        Ok(DemoRuns {
            freq: run_freq_demo(
                &demo_manifest(ExperimentId::FreqDemo, &first),
                Execution::Parallel,
            )?,
            time: run_time_demo(
                &demo_manifest(ExperimentId::TimeDemo, &first),
                Execution::Parallel,
            )?,
            compare: run_compare_demo(
                &demo_manifest(ExperimentId::CompareDemo, &first),
                Execution::Parallel,
            )?,
        })
    })();
    let demo_elapsed = demo_start.elapsed();
    let demo_error = match demo_result {
        Ok(d) => {
            demos = Some(d);
            None
        }
        Err(e) => Some(format!("{e:#}")),
    };
    let demos_ref = || -> Result<&DemoRuns> {
        demos.as_ref().ok_or_else(|| {
            anyhow::anyhow!(
                "demo run failed: {}",
                demo_error.clone().unwrap_or_default()
            )
        })
    };

    outcomes.push(criterion(
        3,
        "frequency distance never exceeds time distance",
        secs(600),
        || {
            let demo = demos_ref()?;
            let c = &demo.compare;
            ensure!(
                c.d_freq <= c.d_time + THM_TOL,
                "demo: d_freq {} > d_time {}",
                c.d_freq,
                c.d_time
            );
            let solver = GapSolver::new(GapConfig::default())?;
            let grid = FrequencyGrid::logspace(1e-2, 1e2, 60)?;
            let mut worst = f64::NEG_INFINITY;
            for seed in 0..20u64 {
                let mut rng = ChaCha20Rng::seed_from_u64(1000 + seed);
                let n = 1 + (seed as usize % 3);
                let samples = rng.random_range(10..=30);
                let fam = |rng: &mut ChaCha20Rng, dseed: u64| {
                    let base = random_stable(rng, n, 0.5..2.0);
                    AffineParametricFamily::new(
                        base,
                        random_directions(n, 2, dseed),
                        DVector::zeros(2),
                    )
                };
                let f1 = fam(&mut rng, 2 * seed)?;
                let f2 = fam(&mut rng, 2 * seed + 1)?;
                let g1 = GaussianParameter::isotropic(2, 0.0, rng.random_range(0.02..0.2))?;
                let g2 = GaussianParameter::isotropic(2, 0.0, rng.random_range(0.02..0.2))?;
                let e1 = sample_ensemble(&f1, &g1, samples, 3 * seed)?;
                let e2 = sample_ensemble(&f2, &g2, samples, 3 * seed + 1)?;
                let r = comparison_check_with(&solver, &e1, &e2, &grid, 1.0, Execution::Parallel)?;
                ensure!(
                    r.d_freq <= r.d_time + THM_TOL,
                    "seed {seed}: d_freq {} > d_time {}",
                    r.d_freq,
                    r.d_time
                );
                worst = worst.max(r.d_freq - r.d_time);
                sweep_reports.push(r.frequency);
                sweep_reports.push(r.time);
            }
            Ok(format!(
                "demo {:.4} <= {:.4}; 20 pairs, max d_freq - d_time = {worst:.4}",
                c.d_freq, c.d_time
            ))
        },
    ));

    outcomes.push(criterion(4, "bound sandwiches", secs(60), || {
        let demo = demos_ref()?;
        let freq = [&demo.freq, &demo.compare.frequency];
        let time = [&demo.time, &demo.compare.time];
        for r in freq {
            ensure!(
                sandwich_ok(r, FREQ_SANDWICH_TOL) && r.sandwich_holds,
                "frequency sandwich violated: {}",
                r.summary_line()
            );
        }
        for r in time {
            ensure!(
                sandwich_ok(r, TIME_SLACK) && r.sandwich_holds,
                "time sandwich violated: {}",
                r.summary_line()
            );
        }
        ensure!(
            sweep_reports.len() == 40,
            "seed sweep incomplete ({} reports)",
            sweep_reports.len()
        );
        for r in &sweep_reports {
            let tol = match r.domain {
                sysdist::distances::Domain::Frequency => FREQ_SANDWICH_TOL,
                sysdist::distances::Domain::Time => TIME_SLACK,
            };
            ensure!(
                sandwich_ok(r, tol) && r.sandwich_holds,
                "sweep sandwich violated: {}",
                r.summary_line()
            );
        }
        Ok(format!(
            "{} reports, zero violations",
            4 + sweep_reports.len()
        ))
    }));

    outcomes.push(criterion(
        5,
        "demo values inside their bands",
        secs(900),
        || {
            ensure!(demo_elapsed < secs(3 * 900), "demos took {demo_elapsed:?}");
            let d = demos_ref()?;
            let f = &d.freq;
            let t = &d.time;
            let parts = [
                within("freq d", f.value, 0.2916, 0.05)?,
                within("freq lb", f.lower_bound.unwrap_or(f64::NAN), 0.2831, 0.05)?,
                within("freq ub", f.upper_bound.unwrap_or(f64::NAN), 0.3075, 0.05)?,
                within("time dist", t.value, 0.7765, 0.05)?,
                within("time lb", t.lower_bound.unwrap_or(f64::NAN), 0.6561, 0.08)?,
                within("time ub", t.upper_bound.unwrap_or(f64::NAN), 0.8252, 0.05)?,
                within("d_freq", d.compare.d_freq, 0.3795, 0.05)?,
                within("d_time", d.compare.d_time, 0.3812, 0.05)?,
            ];
            Ok(format!("{} (demos {demo_elapsed:.1?})", parts.join(" ")))
        },
    ));

    outcomes.push(criterion(
        6,
        "coupling optima match exhaustive permutations",
        secs(60),
        || {
            let mut rng = ChaCha20Rng::seed_from_u64(6);
            let mut worst = 0.0_f64;
            for _ in 0..200 {
                let n = rng.random_range(1..=6);
                let entries: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
                let cost = CostMatrix::new(n, n, entries.clone(), CostKind::Custom, 1.0)?;
                let mu = EmpiricalMeasure::uniform(vec![(); n])?;
                let (_, lo) = min_cost_coupling(&mu, &mu, &cost)?;
                let (_, hi) = max_cost_coupling(&mu, &mu, &cost)?;
                let (brute_lo, brute_hi) = permutation_extremes(n, &entries);
                worst = worst.max((lo - brute_lo).abs()).max((hi - brute_hi).abs());
            }
            ensure!(worst <= 1e-9, "largest discrepancy {worst:e}");
            Ok(format!("200 instances, max error {worst:.1e}"))
        },
    ));

    outcomes.push(criterion(
        7,
        "normalized coprime factors are normalized",
        secs(60),
        || {
            let mut rng = ChaCha20Rng::seed_from_u64(7);
            let grid = FrequencyGrid::logspace(1e-3, 1e3, 200)?;
            let mut worst = 0.0_f64;
            for _ in 0..50 {
                let n = rng.random_range(1..=4);
                let p = random_stable(&mut rng, n, 0.05..2.0);
                let f = nrcf(&p)?;
                for &w in grid.omegas() {
                    let (d, nn) = f.response(w)?;
                    worst = worst.max((d.norm_sqr() + nn.norm_sqr() - 1.0).abs());
                }
            }
            ensure!(worst <= 1e-8, "largest deviation {worst:e}");
            Ok(format!("50 plants, max |N*N + D*D - 1| = {worst:.1e}"))
        },
    ));

    outcomes.push(criterion(
        8,
        "kappa equals chordal distance",
        secs(10),
        || {
            let mut rng = ChaCha20Rng::seed_from_u64(8);
            let mut draw = || {
                let r = 10f64.powf(rng.random_range(-3.0..3.0));
                Complex64::from_polar(
                    r,
                    rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                )
            };
            let (mut worst_k, mut worst_rt) = (0.0_f64, 0.0_f64);
            for _ in 0..10_000 {
                let (p1, p2) = (draw(), draw());
                let (r1, r2) = (inverse_stereo(p1)?, inverse_stereo(p2)?);
                worst_k = worst_k.max((kappa(p1, p2) - chordal_distance(&r1, &r2)).abs());
                for (p, r) in [(p1, r1), (p2, r2)] {
                    worst_rt = worst_rt.max((stereo(&r)? - p).norm() / p.norm().max(1.0));
                }
            }
            ensure!(
                worst_k <= 1e-12 && worst_rt <= 1e-12,
                "kappa {worst_k:e}, round trip {worst_rt:e}"
            );
            Ok(format!(
                "10^4 pairs, kappa {worst_k:.1e}, round trip {worst_rt:.1e}"
            ))
        },
    ));

    outcomes.push(criterion(9, "kappa <= nu-gap <= gap", secs(300), || {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let grid = GapConfig::default().grid;
        let (mut pairs, mut tries) = (0, 0);
        while pairs < 30 {
            tries += 1;
            ensure!(
                tries <= 300,
                "only {pairs} pairs with valid winding in {tries} draws"
            );
            let n1 = rng.random_range(1..=3);
            let n2 = rng.random_range(1..=3);
            let p1 = random_stable(&mut rng, n1, 0.1..2.0);
            let p2 = random_stable(&mut rng, n2, 0.1..2.0);
            let nu = nu_gap(&p1, &p2, &grid)?;
            if !nu.winding_ok {
                continue;
            }
            let g = gap_metric(&p1, &p2)?.value;
            let kmax = nu.kappa_curve.iter().map(|&(_, k)| k).fold(0.0, f64::max);
            ensure!(
                kmax <= nu.value + 1e-12,
                "pair {pairs}: kappa {kmax} > nu-gap {}",
                nu.value
            );
            ensure!(
                nu.value <= g + THM_TOL,
                "pair {pairs}: nu-gap {} > gap {g}",
                nu.value
            );
            pairs += 1;
        }
        let tf = RationalTransferFunction::new(vec![1.0], vec![3.24, 1.26, 1.0])?;
        let nominal = nu_gap(
            &tf,
            &RationalTransferFunction::new(vec![1.0], vec![1.44, 1.32, 1.0])?,
            &grid,
        )?;
        ensure!(
            nominal.value <= 0.3822 + GAP_TOL,
            "resonant pair nu-gap {}",
            nominal.value
        );
        Ok(format!("30 pairs ({tries} draws)"))
    }));

    outcomes.push(criterion(
        10,
        "demo outputs are byte-identical on rerun",
        secs(900),
        || {
            demos_ref()?;
            // Rerun sequentially: the outputs must not depend on scheduling either.
            run_freq_demo(
                &demo_manifest(ExperimentId::FreqDemo, &second),
                Execution::Sequential,
            )?;
            run_time_demo(
                &demo_manifest(ExperimentId::TimeDemo, &second),
                Execution::Sequential,
            )?;
            run_compare_demo(
                &demo_manifest(ExperimentId::CompareDemo, &second),
                Execution::Sequential,
            )?;
            let mut files = 0;
            for id in [
                ExperimentId::FreqDemo,
                ExperimentId::TimeDemo,
                ExperimentId::CompareDemo,
            ] {
                for name in ["report.json", "curves.csv", "summary.txt"] {
                    let a = fs::read(first.join(id.as_str()).join(name))?;
                    let b = fs::read(second.join(id.as_str()).join(name))?;
                    ensure!(a == b, "{id}/{name} differs between runs");
                    files += 1;
                }
            }
            Ok(format!("{files} files identical"))
        },
    ));

    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| o.result.is_err()).collect();
    let total: Duration = outcomes.iter().map(|o| o.elapsed).sum();
    println!(
        "acceptance: {} passed, {} failed ({total:.1?})",
        outcomes.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        for o in &failed {
            eprintln!("failed criterion {}: {}", o.id, o.name);
        }
        std::process::exit(1);
    }
}

/// Minimum and maximum of `(1/n) Σ cost[i, σ(i)]` over all permutations σ.
fn permutation_extremes(n: usize, cost: &[f64]) -> (f64, f64) {
    fn walk(i: usize, n: usize, cost: &[f64], used: &mut [bool], acc: f64, best: &mut (f64, f64)) {
        if i == n {
            best.0 = best.0.min(acc);
            best.1 = best.1.max(acc);
            return;
        }
        for k in 0..n {
            if !used[k] {
                used[k] = true;
                walk(i + 1, n, cost, used, acc + cost[i * n + k], best);
                used[k] = false;
            }
        }
    }
    let mut best = (f64::INFINITY, f64::NEG_INFINITY);
    walk(0, n, cost, &mut vec![false; n], 0.0, &mut best);
    (best.0 / n as f64, best.1 / n as f64)
}
