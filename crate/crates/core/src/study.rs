//! Convergence studies over the manufactured cases.

use alloc::string::String;
use alloc::vec::Vec;

use crate::concentration::ConcentrationBc;
use crate::driver::{PorosityMode, RunSummary, Scenario, Simulator, VelocitySource};
use crate::fields::{l2_error_dg, l2_error_rt, l2_project_element, observed_order, DgField};
use crate::linalg::SolverKind;
use crate::manufactured::{CaseKind, ManufacturedCase};
use crate::physics::Coefficient;
use crate::pressure::{PressureBc, PressureBoundary, PressureInputs, PressureSolver};
use crate::{Mesh, Result};

#[derive(Clone, Debug)]
pub struct StudyConfig {
    /// Cells per side for each refinement level.
    pub cells: Vec<usize>,
    pub degrees: Vec<usize>,
    pub dt: f64,
    pub final_time: f64,
    pub solver: SolverKind,
}

/// Errors of one run; fields the case does not produce are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldErrors {
    pub p: Option<f64>,
    pub u: Option<f64>,
    pub c: Option<f64>,
    pub sigma: Option<f64>,
    pub phi: Option<f64>,
}

impl FieldErrors {
    pub const NAMES: [&'static str; 5] = ["p", "u", "c", "sigma", "phi"];

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "p" => self.p,
            "u" => self.u,
            "c" => self.c,
            "sigma" => self.sigma,
            "phi" => self.phi,
            _ => None,
        }
    }

    fn map2(a: &Self, b: &Self, f: impl Fn(f64, f64) -> Option<f64>) -> Self {
        let g = |x: Option<f64>, y: Option<f64>| x.zip(y).and_then(|(x, y)| f(x, y));
        FieldErrors {
            p: g(a.p, b.p),
            u: g(a.u, b.u),
            c: g(a.c, b.c),
            sigma: g(a.sigma, b.sigma),
            phi: g(a.phi, b.phi),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StudyRow {
    pub k: usize,
    pub cells: usize,
    /// Cell width `1 / cells` on the unit square.
    pub h: f64,
    pub errors: FieldErrors,
    /// Observed orders against the previous (coarser) row of the same `k`.
    pub rates: FieldErrors,
    pub summary: Option<RunSummary>,
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub case: String,
    pub dt: f64,
    pub final_time: f64,
    pub rows: Vec<StudyRow>,
}

impl StudyResult {
    pub fn rows_for(&self, k: usize) -> impl Iterator<Item = &StudyRow> {
        self.rows.iter().filter(move |r| r.k == k)
    }

    /// Smallest observed order of `field` for degree `k`.
    pub fn min_rate(&self, k: usize, field: &str) -> Option<f64> {
        self.rows_for(k)
            .filter_map(|r| r.rates.get(field))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
    }
}

/// Runs `case` for every `(k, cells)` pair, finest last within each `k`.
pub fn run_convergence_study(case: &ManufacturedCase, cfg: &StudyConfig) -> Result<StudyResult> {
    run_convergence_study_with(case, cfg, |_, _, _| {})
}

/// As [`run_convergence_study`], calling `progress(k, cells, &row)` after
/// each run.
pub fn run_convergence_study_with(
    case: &ManufacturedCase,
    cfg: &StudyConfig,
    mut progress: impl FnMut(usize, usize, &StudyRow),
) -> Result<StudyResult> {
    let mut cells = Vec::new();
    for &k in &cfg.degrees {
        crate::check_degree(k)?;
        for &n in &cfg.cells {
            let (errors, summary) = run_study_cell(case, k, n, cfg)?;
            let row = StudyRow {
                k,
                cells: n,
                h: cell_width(case, n),
                errors,
                rates: FieldErrors::default(),
                summary,
            };
            progress(k, n, &row);
            cells.push(row);
        }
    }
    Ok(collect_rows(case, cfg, cells))
}

fn cell_width(case: &ManufacturedCase, n: usize) -> f64 {
    (case.rect.x1 - case.rect.x0) / n as f64
}

/// Errors and run summary of one `(k, cells)` entry of a study.
pub fn run_study_cell(
    case: &ManufacturedCase,
    k: usize,
    cells: usize,
    cfg: &StudyConfig,
) -> Result<(FieldErrors, Option<RunSummary>)> {
    crate::check_degree(k)?;
    let mesh = Mesh::build_uniform(cells, cells, case.rect)?;
    run_case(case, &mesh, k, cfg)
}

/// Orders rows by `(k, position in cfg.cells)` and fills the rates from
/// consecutive rows of the same `k`.
pub fn collect_rows(
    case: &ManufacturedCase,
    cfg: &StudyConfig,
    mut rows: Vec<StudyRow>,
) -> StudyResult {
    let rank = |r: &StudyRow| {
        let kk = cfg
            .degrees
            .iter()
            .position(|&d| d == r.k)
            .unwrap_or(usize::MAX);
        let nn = cfg
            .cells
            .iter()
            .position(|&c| c == r.cells)
            .unwrap_or(usize::MAX);
        (kk, nn)
    };
    rows.sort_by_key(rank);
    for i in 0..rows.len() {
        rows[i].h = cell_width(case, rows[i].cells);
        rows[i].rates = match i.checked_sub(1).map(|j| &rows[j]) {
            Some(prev) if prev.k == rows[i].k => {
                let (h0, h) = (prev.h, rows[i].h);
                FieldErrors::map2(&prev.errors, &rows[i].errors, |a, b| {
                    observed_order(a, b, h0, h).ok()
                })
            }
            _ => FieldErrors::default(),
        };
    }
    StudyResult {
        case: case.name.into(),
        dt: cfg.dt,
        final_time: cfg.final_time,
        rows,
    }
}

fn run_case(
    case: &ManufacturedCase,
    mesh: &Mesh,
    k: usize,
    cfg: &StudyConfig,
) -> Result<(FieldErrors, Option<RunSummary>)> {
    match case.kind {
        CaseKind::Pressure => pressure_only(case, mesh, k, cfg).map(|e| (e, None)),
        CaseKind::Concentration | CaseKind::Coupled => {
            let (e, s) = transient(case, mesh, k, cfg)?;
            Ok((e, Some(s)))
        }
    }
}

fn exact_dirichlet(f: &crate::manufactured::ScalarFn) -> Coefficient {
    let f = f.clone();
    Coefficient::function(move |x, t| f(x, t))
}

fn pressure_only(
    case: &ManufacturedCase,
    mesh: &Mesh,
    k: usize,
    cfg: &StudyConfig,
) -> Result<FieldErrors> {
    let t = case.final_time;
    let por = case.porosity.clone();
    let phi = l2_project_element(&|x| por(x, t), mesh, k)?;
    let conc = case.concentration.clone();
    let c = l2_project_element(&|x| conc(x, t), mesh, k)?;
    let bc = PressureBoundary::uniform(PressureBc::Dirichlet(exact_dirichlet(&case.pressure)));
    let mut solver = PressureSolver::new(mesh, k, &bc, cfg.solver)?;
    let inp = PressureInputs {
        phi: &phi,
        c_prev: &c,
        params: &case.params,
        f_inj: &case.f_inj,
        f_prod: &case.f_prod,
        boundary: &bc,
        time: t,
    };
    let sol = solver.solve(mesh, &inp)?;
    let (p, u) = (case.pressure.clone(), case.velocity.clone());
    Ok(FieldErrors {
        p: Some(l2_error_dg(&sol.p, mesh, &|x| p(x, t))?),
        u: Some(l2_error_rt(&sol.u, mesh, &|x| u(x, t))?),
        ..Default::default()
    })
}

/// Builds the time-marching scenario for a transient manufactured case.
pub fn manufactured_scenario(
    case: &ManufacturedCase,
    mesh: &Mesh,
    k: usize,
    dt: f64,
    solver: SolverKind,
) -> Scenario {
    let coupled = case.kind == CaseKind::Coupled;
    let velocity = if coupled {
        VelocitySource::Solve(PressureBoundary::uniform(PressureBc::Dirichlet(
            exact_dirichlet(&case.pressure),
        )))
    } else {
        VelocitySource::Prescribed {
            velocity: case.velocity.clone(),
            steady: false,
        }
    };
    let porosity = if coupled {
        PorosityMode::Evolve
    } else {
        PorosityMode::Prescribed {
            porosity: case.porosity.clone(),
            steady: false,
        }
    };
    Scenario {
        mesh: mesh.clone(),
        k,
        params: case.params.clone(),
        f_inj: case.f_inj.clone(),
        f_prod: case.f_prod.clone(),
        velocity,
        porosity,
        concentration_bc: ConcentrationBc::Dirichlet(exact_dirichlet(&case.concentration)),
        dt,
        solver,
        freeze_concentration_operator: false,
    }
}

fn transient(
    case: &ManufacturedCase,
    mesh: &Mesh,
    k: usize,
    cfg: &StudyConfig,
) -> Result<(FieldErrors, RunSummary)> {
    let mut sc = manufactured_scenario(case, mesh, k, cfg.dt, cfg.solver);
    if case.kind == CaseKind::Concentration {
        // Velocity, porosity and reaction of this case do not depend on time.
        sc.velocity = VelocitySource::Prescribed {
            velocity: case.velocity.clone(),
            steady: true,
        };
        sc.porosity = PorosityMode::Prescribed {
            porosity: case.porosity.clone(),
            steady: true,
        };
        sc.freeze_concentration_operator = true;
    }
    let (por, conc) = (case.porosity.clone(), case.concentration.clone());
    let phi0: DgField = l2_project_element(&|x| por(x, 0.0), mesh, k)?;
    let c0 = l2_project_element(&|x| conc(x, 0.0), mesh, k)?;
    let mut sim = Simulator::new(sc, phi0, c0, 0.0)?;
    let mut summary = RunSummary::new();
    sim.run_until(cfg.final_time, |_, r| summary.record(r))?;
    let st = sim.state();
    let t = st.time;
    let (p, u, c, s, ph) = (
        case.pressure.clone(),
        case.velocity.clone(),
        case.concentration.clone(),
        case.flux.clone(),
        case.porosity.clone(),
    );
    let mut e = FieldErrors {
        c: Some(l2_error_dg(&st.c, mesh, &|x| c(x, t))?),
        sigma: Some(l2_error_rt(&st.sigma, mesh, &|x| s(x, t))?),
        ..Default::default()
    };
    if case.kind == CaseKind::Coupled {
        e.phi = Some(l2_error_dg(&st.phi, mesh, &|x| ph(x, t))?);
        e.u = Some(l2_error_rt(&st.u, mesh, &|x| u(x, t))?);
        if let Some(ph_) = &st.p {
            e.p = Some(l2_error_dg(ph_, mesh, &|x| p(x, t))?);
        }
    }
    Ok((e, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manufactured::{concentration_cd, coupled, pressure_elliptic};

    fn cfg(cells: &[usize], degrees: &[usize], dt: f64, t: f64) -> StudyConfig {
        StudyConfig {
            cells: cells.to_vec(),
            degrees: degrees.to_vec(),
            dt,
            final_time: t,
            solver: SolverKind::Direct,
        }
    }

    #[test]
    fn pressure_rates_and_layout() {
        let r = run_convergence_study(&pressure_elliptic(), &cfg(&[4, 8, 16], &[0, 1], 1.0, 1.0))
            .unwrap();
        assert_eq!(r.rows.len(), 6);
        assert!(r.rows[0].rates.p.is_none());
        assert!(r.rows[0].errors.c.is_none());
        for k in [0, 1] {
            let last = r.rows_for(k).last().unwrap();
            assert!((last.rates.p.unwrap() - (k + 1) as f64).abs() < 0.1);
            assert!((last.rates.u.unwrap() - (k + 1) as f64).abs() < 0.1);
        }
        assert!(r.min_rate(1, "p").unwrap() > 1.8);
        assert_eq!(r.min_rate(1, "phi"), None);
    }

    #[test]
    fn repeated_width_has_no_rate() {
        let r = run_convergence_study(&pressure_elliptic(), &cfg(&[4, 4], &[0], 1.0, 1.0)).unwrap();
        assert!(r.rows[1].rates.p.is_none());
        assert_eq!(r.rows[0].errors, r.rows[1].errors);
    }

    #[test]
    fn runs_are_bit_identical() {
        let c = cfg(&[3, 6], &[1], 0.01, 0.03);
        let a = run_convergence_study(&concentration_cd(1.0), &c).unwrap();
        let b = run_convergence_study(&concentration_cd(1.0), &c).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.errors, y.errors);
            assert_eq!(x.summary, y.summary);
        }
        assert_eq!(a.rows[0].summary.as_ref().unwrap().steps, 3);
    }

    #[test]
    fn coupled_errors_are_space_dominated() {
        let e = |dt: f64| {
            run_convergence_study(&coupled(), &cfg(&[8], &[1], dt, 0.01))
                .unwrap()
                .rows[0]
                .errors
        };
        let (a, b) = (e(1e-4), e(5e-5));
        for f in FieldErrors::NAMES {
            let (x, y) = (a.get(f).unwrap(), b.get(f).unwrap());
            assert!((x - y).abs() < 0.05 * x, "{f}: {x} {y}");
        }
    }

    #[test]
    fn unsupported_degree_is_rejected() {
        let r = run_convergence_study(&pressure_elliptic(), &cfg(&[2], &[3], 1.0, 1.0));
        assert!(matches!(r, Err(crate::Error::UnsupportedDegree(3))));
    }
}
