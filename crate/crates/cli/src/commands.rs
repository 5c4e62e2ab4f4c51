//! The work behind each subcommand, independent of argument parsing.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{Context, Result};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use wormhole_core::fields::DgField;
use wormhole_core::porosity::{porosity_residual, porosity_step};
use wormhole_core::reference::{find_series, reference_table};
use wormhole_core::study::{
    collect_rows, run_study_cell, FieldErrors, StudyConfig, StudyResult, StudyRow,
};
use wormhole_core::wormhole::{run_wormhole, WormholeRun, WormholeStep};

use crate::config::{CaseName, ChecksBlock, ScenarioConfig, SnapshotFormat};
use crate::manifest::Manifest;
use crate::snapshot::{write_csv_points, write_vtk};
use crate::table::FieldTable;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        CheckOutcome {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

pub fn all_pass(checks: &[CheckOutcome]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Runs every `(k, cells)` entry of a study on up to `threads` workers.
/// Rows are merged in configuration order, so the result does not depend
/// on the thread count.
pub fn run_study(
    cfg: &ScenarioConfig,
    threads: usize,
    mut progress: impl FnMut(&StudyRow) + Send,
) -> Result<StudyResult> {
    let r = cfg.resolved();
    let case = r.manufactured()?;
    let d = &r.discretization;
    let study = StudyConfig {
        cells: r.mesh.cells.clone().unwrap_or_default(),
        degrees: d.degrees.clone().unwrap_or_default(),
        dt: d.dt.unwrap_or(1.0),
        final_time: d.final_time.unwrap_or(1.0),
        solver: r.solver_kind(),
    };
    let jobs: Vec<(usize, usize)> = study
        .degrees
        .iter()
        .flat_map(|&k| study.cells.iter().map(move |&n| (k, n)))
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<wormhole_core::Result<StudyRow>>>> =
        Mutex::new(jobs.iter().map(|_| None).collect());
    let progress = Mutex::new(&mut progress);
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(k, n)) = jobs.get(i) else { break };
                let row = run_study_cell(&case, k, n, &study).map(|(errors, summary)| StudyRow {
                    k,
                    cells: n,
                    h: 0.0,
                    errors,
                    rates: FieldErrors::default(),
                    summary,
                });
                if let Ok(row) = &row {
                    if let Ok(mut p) = progress.lock() {
                        (*p)(row);
                    }
                }
                if let Ok(mut res) = results.lock() {
                    res[i] = Some(row);
                }
            });
        }
    });
    let mut rows = Vec::with_capacity(jobs.len());
    let results = results.into_inner().unwrap_or_default();
    for (slot, (k, n)) in results.into_iter().zip(&jobs) {
        let row = slot
            .with_context(|| format!("k={k} cells={n} did not run"))?
            .with_context(|| format!("k={k} cells={n}"))?;
        rows.push(row);
    }
    Ok(collect_rows(&case, &study, rows))
}

/// Evaluates the configured thresholds on a finished study.
pub fn study_checks(cfg: &ScenarioConfig, r: &StudyResult) -> Vec<CheckOutcome> {
    let c = &cfg.checks;
    let mut out = Vec::new();
    if let Some(orders) = &c.min_order {
        for (field, need) in orders {
            let mut worst: Option<(f64, f64)> = None;
            let mut seen = false;
            for row in &r.rows {
                let (Some(rate), Some(&need)) = (row.rates.get(field), need.get(row.k)) else {
                    continue;
                };
                seen = true;
                if rate < need && worst.is_none_or(|w| rate - need < w.0 - w.1) {
                    worst = Some((rate, need));
                }
            }
            if !seen {
                continue;
            }
            out.push(match worst {
                None => CheckOutcome::new(format!("min_order {field}"), true, "all rates reached"),
                Some((rate, need)) => CheckOutcome::new(
                    format!("min_order {field}"),
                    false,
                    format!("rate {rate:.4} below {need}"),
                ),
            });
        }
    }
    let table = reference_table(cfg.case.as_str(), cfg.diffusion.unwrap_or(1.0));
    if let Some(table) = table.filter(|_| c.rate_tolerance.is_some() || c.error_factor.is_some()) {
        let mut failures = Vec::new();
        let mut compared = 0;
        for row in &r.rows {
            for f in FieldErrors::NAMES {
                if c.reference_fields
                    .as_ref()
                    .is_some_and(|v| !v.iter().any(|x| x == f))
                {
                    continue;
                }
                let Some(s) = find_series(table, f, row.k) else {
                    continue;
                };
                if let (Some(tol), Some(got), Some(want)) =
                    (c.rate_tolerance, row.rates.get(f), s.rate_at(row.h))
                {
                    compared += 1;
                    if (got - want).abs() > tol {
                        failures.push(format!(
                            "{f} k={} h={}: rate {got:.4} vs {want}",
                            row.k, row.h
                        ));
                    }
                }
                if let (Some(fac), Some(got), Some(want)) =
                    (c.error_factor, row.errors.get(f), s.error_at(row.h))
                {
                    compared += 1;
                    let ratio = got / want;
                    if !(ratio <= fac && ratio >= 1.0 / fac) {
                        failures.push(format!(
                            "{f} k={} h={}: error {got:.4e} vs {want:.4e}",
                            row.k, row.h
                        ));
                    }
                }
            }
        }
        if compared > 0 {
            let detail = if failures.is_empty() {
                format!("{compared} entries within tolerance")
            } else {
                failures.join("; ")
            };
            out.push(CheckOutcome::new(
                "reference table",
                failures.is_empty(),
                detail,
            ));
        }
    }
    let summaries: Vec<_> = r.rows.iter().filter_map(|r| r.summary.as_ref()).collect();
    if !summaries.is_empty() {
        if let Some(max) = c.max_mass_residual {
            let worst = summaries
                .iter()
                .map(|s| s.max_mass_residual)
                .fold(0.0, f64::max);
            out.push(limit("mass residual", worst, max));
        }
        if let Some(max) = c.max_flux_jump {
            let worst = summaries
                .iter()
                .map(|s| s.max_velocity_jump.max(s.max_total_flux_jump))
                .fold(0.0, f64::max);
            out.push(limit("flux jump", worst, max));
        }
    }
    let finite = r.rows.iter().all(|row| {
        FieldErrors::NAMES
            .iter()
            .filter_map(|f| row.errors.get(f))
            .all(f64::is_finite)
    });
    out.push(CheckOutcome::new("finite errors", finite, ""));
    out
}

fn prefixed(what: &str, mut checks: Vec<CheckOutcome>) -> Vec<CheckOutcome> {
    for c in &mut checks {
        c.name = format!("{what}: {}", c.name);
    }
    checks
}

fn limit(name: &str, worst: f64, max: f64) -> CheckOutcome {
    CheckOutcome::new(name, worst <= max, format!("{worst:.3e} (limit {max:.1e})"))
}

pub fn wormhole_checks(c: &ChecksBlock, run: &WormholeRun) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let bounded = run.steps.iter().all(|s| s.phi_min > 0.0 && s.phi_max < 1.0);
    out.push(CheckOutcome::new("porosity in (0, 1)", bounded, ""));
    if let Some(max) = c.max_mass_residual {
        out.push(limit("mass residual", run.summary.max_mass_residual, max));
    }
    if let Some(max) = c.max_flux_jump {
        let worst = run
            .steps
            .iter()
            .map(|s| s.velocity_jump.max(s.total_flux_jump))
            .fold(0.0, f64::max);
        out.push(limit("flux jump", worst, max));
    }
    if let Some(min) = c.min_channel_tip {
        let tip = run.final_tip();
        out.push(CheckOutcome::new(
            "channel tip",
            tip.is_some_and(|t| t >= min),
            format!("{tip:?} (need {min})"),
        ));
    }
    if c.tip_nondecreasing == Some(true) {
        out.push(CheckOutcome::new(
            "tip nondecreasing",
            run.tip_nondecreasing(),
            "",
        ));
    }
    out
}

/// Writes a full-precision and a display CSV per field and returns the
/// written paths.
pub fn write_study_tables(dir: &Path, r: &StudyResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut paths = Vec::new();
    for f in FieldErrors::NAMES {
        if let Some(t) = FieldTable::from_study(r, f) {
            let path = dir.join(format!("{}_{f}.csv", r.case));
            t.write_csv(BufWriter::new(File::create(&path)?))?;
            paths.push(path);
            let path = dir.join(format!("{}_{f}_display.csv", r.case));
            t.write_display_csv(BufWriter::new(File::create(&path)?))?;
            paths.push(path);
        }
    }
    Ok(paths)
}

fn time_label(t: f64) -> String {
    format!("{t:08.3}").replace('.', "_")
}

/// Writes the snapshots and the per-step log of a wormhole run.
pub fn write_wormhole_outputs(
    dir: &Path,
    run: &WormholeRun,
    formats: &[SnapshotFormat],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut paths = Vec::new();
    for s in &run.snapshots {
        let fields: [(&str, &DgField); 2] = [("porosity", &s.phi), ("concentration", &s.c)];
        let stem = format!("snapshot_t{}", time_label(s.time));
        for f in formats {
            let path = match f {
                SnapshotFormat::VtkLegacyAscii => {
                    let path = dir.join(format!("{stem}.vtk"));
                    let title = format!("wormhole t={}", s.time);
                    write_vtk(
                        BufWriter::new(File::create(&path)?),
                        &run.mesh,
                        &title,
                        &fields,
                    )?;
                    path
                }
                SnapshotFormat::CsvPoints => {
                    let path = dir.join(format!("{stem}.csv"));
                    write_csv_points(BufWriter::new(File::create(&path)?), &run.mesh, &fields)?;
                    path
                }
            };
            paths.push(path);
        }
    }
    let path = dir.join("steps.csv");
    write_steps(&path, &run.steps)?;
    paths.push(path);
    Ok(paths)
}

fn write_steps(path: &Path, steps: &[WormholeStep]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record([
        "step",
        "time",
        "phi_min",
        "phi_max",
        "seed_porosity",
        "channel_tip",
        "mass_relative",
        "velocity_jump",
        "total_flux_jump",
    ])?;
    let e = |v: f64| format!("{v:.16e}");
    for s in steps {
        w.write_record([
            s.step.to_string(),
            e(s.time),
            e(s.phi_min),
            e(s.phi_max),
            e(s.seed_porosity),
            s.channel_tip.map_or(String::new(), e),
            e(s.mass_relative),
            e(s.velocity_jump),
            e(s.total_flux_jump),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub struct Outcome {
    pub manifest: Manifest,
    pub report: String,
}

/// Study subcommands: run, write tables and manifest, evaluate checks.
pub fn study_command(
    command: &str,
    cfg: &ScenarioConfig,
    out: &Path,
    threads: usize,
    verbose: bool,
) -> Result<Outcome> {
    let start = Instant::now();
    let r = run_study(cfg, threads, |row| {
        if verbose {
            eprintln!("  k={} cells={} done", row.k, row.cells);
        }
    })?;
    let outputs = write_study_tables(out, &r)?;
    let checks = study_checks(cfg, &r);
    let mut report = String::new();
    for f in FieldErrors::NAMES {
        if let Some(t) = FieldTable::from_study(&r, f) {
            report += &t.display();
            report.push('\n');
        }
    }
    let manifest = Manifest::new(command, cfg, None, threads, start, outputs, checks, out)?;
    Ok(Outcome { manifest, report })
}

pub fn wormhole_command(cfg: &ScenarioConfig, out: &Path, verbose: bool) -> Result<Outcome> {
    if cfg.case != CaseName::Wormhole {
        anyhow::bail!(
            "the wormhole command needs case \"wormhole\", got {:?}",
            cfg.case.as_str()
        );
    }
    let start = Instant::now();
    let wc = cfg.wormhole_config();
    let every = ((wc.final_time / wc.dt).round() as usize / 20).max(1);
    let run = run_wormhole(&wc, |s| {
        if verbose && s.step % every == 0 {
            eprintln!(
                "  t={:.3} porosity [{:.4}, {:.4}] tip {:?}",
                s.time, s.phi_min, s.phi_max, s.channel_tip
            );
        }
    })?;
    let formats = cfg.resolved().output.formats.unwrap_or_default();
    let outputs = write_wormhole_outputs(out, &run, &formats)?;
    let checks = wormhole_checks(&cfg.checks, &run);
    let report = format!(
        "{} steps, porosity [{:.4}, {:.4}], channel tip {:?}, worst mass residual {:.2e}\n",
        run.summary.steps,
        run.summary.phi_min,
        run.summary.phi_max,
        run.final_tip(),
        run.summary.max_mass_residual
    );
    let manifest = Manifest::new("wormhole", cfg, None, 1, start, outputs, checks, out)?;
    Ok(Outcome { manifest, report })
}

/// Random porosity updates: each stays in `[phi_prev, 1)` and solves its
/// update equation.
fn porosity_samples(rng: &mut StdRng, n: usize) -> CheckOutcome {
    let mut worst = 0.0f64;
    let mut bad = None;
    for i in 0..n {
        let phi_prev: f64 = rng.gen_range(1e-6..1.0 - 1e-6);
        let c_bar: f64 = rng.gen_range(0.0..=1.0);
        let dt = 10f64.powf(rng.gen_range(-6.0..=6.0));
        let rate: f64 = rng.gen_range(1e-3..10.0);
        match porosity_step(phi_prev, c_bar, dt, rate) {
            Ok(phi) if phi >= phi_prev && phi < 1.0 => {
                worst = worst.max(porosity_residual(phi, phi_prev, c_bar, dt, rate).abs());
            }
            other => {
                bad = Some(format!("sample {i}: {other:?} from {phi_prev}"));
                break;
            }
        }
    }
    match bad {
        Some(b) => CheckOutcome::new("porosity bounds", false, b),
        None => CheckOutcome::new(
            "porosity bounds",
            worst <= 1e-13,
            format!("{n} samples, worst residual {worst:.1e}"),
        ),
    }
}

/// Quick randomized sanity run: porosity update samples, then small
/// pressure and coupled studies on mesh sizes and steps drawn from `seed`.
pub fn selftest(seed: u64, out: &Path, threads: usize) -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.gen_range(3..=6);
    let k = rng.gen_range(0..=2usize);
    let mut pressure = crate::config::builtin(CaseName::PressureElliptic, None);
    pressure.mesh.cells = Some(vec![n, 2 * n, 4 * n]);
    pressure.discretization.degrees = Some(vec![k]);
    pressure.checks = ChecksBlock {
        min_order: Some(
            [("p", k), ("u", k)]
                .into_iter()
                .map(|(f, k)| (f.to_string(), vec![k as f64 + 0.5; 3]))
                .collect(),
        ),
        ..Default::default()
    };
    let p = run_study(&pressure, threads, |_| {})?;
    let mut checks = prefixed("pressure", study_checks(&pressure, &p));

    checks.push(porosity_samples(&mut rng, 10_000));

    let m = rng.gen_range(3..=5);
    let dt = rng.gen_range(1e-3..1e-2);
    let mut coupled = crate::config::builtin(CaseName::Coupled, None);
    coupled.mesh.cells = Some(vec![m]);
    coupled.discretization.degrees = Some(vec![1]);
    coupled.discretization.dt = Some(dt);
    coupled.discretization.final_time = Some(3.0 * dt);
    coupled.checks.min_order = None;
    let c = run_study(&coupled, threads, |_| {})?;
    checks.extend(prefixed("coupled", study_checks(&coupled, &c)));
    let mut outputs = write_study_tables(out, &p)?;
    outputs.extend(write_study_tables(out, &c)?);
    let report = format!(
        "seed {seed}: pressure k={k} on {n}, {}, {} cells; coupled k=1 on {m} cells, dt={dt:.3e}\n",
        2 * n,
        4 * n
    );
    let manifest = Manifest::new(
        "selftest",
        &pressure,
        Some(seed),
        threads,
        start,
        outputs,
        checks,
        out,
    )?;
    Ok(Outcome { manifest, report })
}
