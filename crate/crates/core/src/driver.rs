//! Time marching: porosity, then velocity, then concentration, each step.

use crate::concentration::{
    mass_balance_check, ConcentrationBc, ConcentrationDiagnostics, ConcentrationInputs,
    ConcentrationSolver, MassBalance,
};
use crate::fields::{l2_project_element, rt_interpolate, DgField, RtField, TraceField};
use crate::linalg::SolverKind;
use crate::manufactured::{ScalarFn, VectorFn};
use crate::physics::{Coefficient, ModelParams};
use crate::porosity::porosity_field_step;
use crate::pressure::{PressureBoundary, PressureDiagnostics, PressureInputs, PressureSolver};
use crate::{Error, Mesh, Result};

/// Where the Darcy velocity of each step comes from.
#[derive(Clone)]
pub enum VelocitySource {
    /// Hybrid mixed pressure solve with these boundary conditions.
    Solve(PressureBoundary),
    /// Interpolated from a closed form; `steady` skips re-interpolation.
    Prescribed { velocity: VectorFn, steady: bool },
}

#[derive(Clone)]
pub enum PorosityMode {
    /// Updated from the lagged, clamped concentration.
    Evolve,
    /// Projected from a closed form every step; `steady` projects once.
    Prescribed { porosity: ScalarFn, steady: bool },
}

#[derive(Clone)]
pub struct Scenario {
    pub mesh: Mesh,
    pub k: usize,
    pub params: ModelParams,
    pub f_inj: Coefficient,
    pub f_prod: Coefficient,
    pub velocity: VelocitySource,
    pub porosity: PorosityMode,
    pub concentration_bc: ConcentrationBc,
    pub dt: f64,
    pub solver: SolverKind,
    /// Reuse the first concentration operator; only valid when porosity,
    /// velocity and reaction terms are steady.
    pub freeze_concentration_operator: bool,
}

impl core::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Scenario")
            .field("k", &self.k)
            .field("elements", &self.mesh.n_elements())
            .field("dt", &self.dt)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub struct TimeState {
    pub step: usize,
    pub time: f64,
    pub phi: DgField,
    pub c: DgField,
    pub u: RtField,
    pub p: Option<DgField>,
    pub sigma: RtField,
    pub lambda_c: TraceField,
}

#[derive(Clone, Debug)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub pressure: Option<PressureDiagnostics>,
    pub concentration: ConcentrationDiagnostics,
    pub mass: MassBalance,
    pub phi_min: f64,
    pub phi_max: f64,
}

pub struct Simulator {
    scenario: Scenario,
    pressure: Option<PressureSolver>,
    concentration: ConcentrationSolver,
    state: TimeState,
    t0: f64,
}

impl core::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Simulator")
            .field("scenario", &self.scenario)
            .field("step", &self.state.step)
            .field("time", &self.state.time)
            .finish_non_exhaustive()
    }
}

impl Simulator {
    /// Starts from `(phi0, c0)` at `t0`.
    pub fn new(scenario: Scenario, phi0: DgField, c0: DgField, t0: f64) -> Result<Self> {
        crate::check_degree(scenario.k)?;
        scenario.params.validate()?;
        if !(scenario.dt > 0.0) || !scenario.dt.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: scenario.dt,
            });
        }
        let mesh = &scenario.mesh;
        for f in [&phi0, &c0] {
            f.check_mesh(mesh)?;
            if f.degree() != scenario.k {
                return Err(Error::Mismatch {
                    what: "initial field degree",
                    expected: scenario.k,
                    found: f.degree(),
                });
            }
        }
        let pressure = match &scenario.velocity {
            VelocitySource::Solve(bc) => {
                Some(PressureSolver::new(mesh, scenario.k, bc, scenario.solver)?)
            }
            VelocitySource::Prescribed { .. } => None,
        };
        let concentration = ConcentrationSolver::new(
            mesh,
            scenario.k,
            &scenario.concentration_bc,
            scenario.solver,
        )?
        .freeze_operator(scenario.freeze_concentration_operator);
        let u = match &scenario.velocity {
            VelocitySource::Prescribed { velocity, .. } => {
                let v = velocity.clone();
                rt_interpolate(&|x| v(x, t0), mesh, scenario.k)?
            }
            VelocitySource::Solve(_) => RtField::zeros(mesh, scenario.k),
        };
        let state = TimeState {
            step: 0,
            time: t0,
            phi: phi0,
            c: c0,
            u,
            p: None,
            sigma: RtField::zeros(mesh, scenario.k),
            lambda_c: TraceField::zeros(mesh, scenario.k),
        };
        Ok(Simulator {
            scenario,
            pressure,
            concentration,
            state,
            t0,
        })
    }

    pub fn state(&self) -> &TimeState {
        &self.state
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn mesh(&self) -> &Mesh {
        &self.scenario.mesh
    }

    /// Advances one step; failures carry the step number.
    pub fn step(&mut self) -> Result<StepReport> {
        let n = self.state.step + 1;
        self.advance().map_err(|e| e.at_step(n))
    }

    /// Steps until `time >= t_end` (within a hundredth of a step), calling
    /// `observe` after each step.
    pub fn run_until(
        &mut self,
        t_end: f64,
        mut observe: impl FnMut(&TimeState, &StepReport),
    ) -> Result<()> {
        while self.state.time < t_end - 0.01 * self.scenario.dt {
            let report = self.step()?;
            observe(&self.state, &report);
        }
        Ok(())
    }

    fn advance(&mut self) -> Result<StepReport> {
        let sc = &self.scenario;
        let mesh = &sc.mesh;
        let t_prev = self.state.time;
        let step = self.state.step + 1;
        let time = self.t0 + step as f64 * sc.dt;
        let phi = match &sc.porosity {
            PorosityMode::Evolve => porosity_field_step(
                &self.state.phi,
                &self.state.c,
                sc.dt,
                &sc.params,
                mesh,
                t_prev,
            )?,
            PorosityMode::Prescribed { steady: true, .. } => self.state.phi.clone(),
            PorosityMode::Prescribed { porosity, .. } => {
                let f = porosity.clone();
                l2_project_element(&|x| f(x, time), mesh, sc.k)?
            }
        };
        let (phi_min, phi_max) = phi.min_max();
        if !(phi_min > 0.0 && phi_max < 1.0) && matches!(sc.porosity, PorosityMode::Evolve) {
            return Err(Error::Domain {
                what: "porosity",
                value: if phi_min <= 0.0 { phi_min } else { phi_max },
            });
        }
        let mut pressure_diag = None;
        let mut p = None;
        let u = match (&sc.velocity, self.pressure.as_mut()) {
            (VelocitySource::Solve(bc), Some(solver)) => {
                let inp = PressureInputs {
                    phi: &phi,
                    c_prev: &self.state.c,
                    params: &sc.params,
                    f_inj: &sc.f_inj,
                    f_prod: &sc.f_prod,
                    boundary: bc,
                    time,
                };
                let sol = solver.solve(mesh, &inp)?;
                pressure_diag = Some(sol.diagnostics);
                p = Some(sol.p);
                sol.u
            }
            (VelocitySource::Prescribed { steady: true, .. }, _) => self.state.u.clone(),
            (VelocitySource::Prescribed { velocity, .. }, _) => {
                let v = velocity.clone();
                rt_interpolate(&|x| v(x, time), mesh, sc.k)?
            }
            (VelocitySource::Solve(_), None) => {
                unreachable!("pressure solver built with the simulator")
            }
        };
        if !u.is_finite() {
            return Err(Error::NonFinite { what: "velocity" });
        }
        let inp = ConcentrationInputs {
            phi: &phi,
            phi_prev: &self.state.phi,
            c_prev: &self.state.c,
            u: &u,
            params: &sc.params,
            f_inj: &sc.f_inj,
            f_prod: &sc.f_prod,
            boundary: &sc.concentration_bc,
            time,
            dt: sc.dt,
        };
        let sol = self.concentration.solve(mesh, &inp)?;
        if !sol.c.is_finite() || !sol.sigma.is_finite() {
            return Err(Error::NonFinite {
                what: "concentration",
            });
        }
        let mass = mass_balance_check(mesh, self.concentration.reference(), &inp, &sol);
        self.state = TimeState {
            step,
            time,
            phi,
            c: sol.c,
            u,
            p,
            sigma: sol.sigma,
            lambda_c: sol.lambda,
        };
        Ok(StepReport {
            step,
            time,
            pressure: pressure_diag,
            concentration: sol.diagnostics,
            mass,
            phi_min,
            phi_max,
        })
    }
}

/// Summary over many steps: worst values of the per-step checks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub max_mass_residual: f64,
    pub max_velocity_jump: f64,
    pub max_total_flux_jump: f64,
    pub max_sigma_jump: f64,
    pub min_stability_margin: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

impl RunSummary {
    pub fn new() -> Self {
        RunSummary {
            min_stability_margin: f64::INFINITY,
            phi_min: f64::INFINITY,
            phi_max: f64::NEG_INFINITY,
            ..Default::default()
        }
    }

    pub fn record(&mut self, r: &StepReport) {
        self.steps += 1;
        self.max_mass_residual = self.max_mass_residual.max(r.mass.relative);
        if let Some(p) = &r.pressure {
            self.max_velocity_jump = self.max_velocity_jump.max(p.flux_jump);
        }
        self.max_total_flux_jump = self
            .max_total_flux_jump
            .max(r.concentration.total_flux_jump);
        self.max_sigma_jump = self.max_sigma_jump.max(r.concentration.sigma_flux_jump);
        self.min_stability_margin = self
            .min_stability_margin
            .min(r.concentration.stability_margin);
        self.phi_min = self.phi_min.min(r.phi_min);
        self.phi_max = self.phi_max.max(r.phi_max);
    }
}

/// Projects the initial porosity and concentration closed forms.
pub fn initial_fields(
    mesh: &Mesh,
    k: usize,
    porosity: &dyn Fn(crate::Point) -> f64,
    concentration: &dyn Fn(crate::Point) -> f64,
) -> Result<(DgField, DgField)> {
    Ok((
        l2_project_element(porosity, mesh, k)?,
        l2_project_element(concentration, mesh, k)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concentration::ConcentrationSolution;
    use crate::manufactured::coupled;
    use crate::pressure::{pressure_residual, PressureSolution};
    use crate::study::manufactured_scenario;
    use crate::Rect;
    use alloc::sync::Arc;

    fn coupled_sim(n: usize, dt: f64) -> Simulator {
        let case = coupled();
        let mesh = Mesh::build_uniform(n, n, Rect::UNIT).unwrap();
        let sc = manufactured_scenario(&case, &mesh, 1, dt, SolverKind::Direct);
        let (por, conc) = (case.porosity.clone(), case.concentration.clone());
        let (phi0, c0) = initial_fields(&mesh, 1, &|x| por(x, 0.5), &|x| conc(x, 0.5)).unwrap();
        Simulator::new(sc, phi0, c0, 0.5).unwrap()
    }

    #[test]
    fn no_acid_is_a_fixed_point() {
        let mut sim = coupled_sim(3, 0.01);
        sim.scenario.f_inj = Coefficient::Constant(0.0);
        sim.scenario.params.c_inj = Coefficient::Constant(0.0);
        sim.scenario.concentration_bc = ConcentrationBc::Dirichlet(Coefficient::Constant(0.0));
        sim.concentration = ConcentrationSolver::new(
            &sim.scenario.mesh,
            1,
            &sim.scenario.concentration_bc,
            SolverKind::Direct,
        )
        .unwrap();
        sim.state.c = DgField::zeros(&sim.scenario.mesh, 1);
        let phi0 = sim.state.phi.clone();
        for _ in 0..2 {
            sim.step().unwrap();
        }
        assert_eq!(sim.state.phi.coeffs(), phi0.coeffs());
        assert!(sim.state.c.coeffs().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn one_step_satisfies_both_systems() {
        let mut sim = coupled_sim(4, 1e-3);
        let (phi_prev, c_prev) = (sim.state.phi.clone(), sim.state.c.clone());
        let report = sim.step().unwrap();
        let sc = &sim.scenario;
        let mesh = &sc.mesh;
        let st = &sim.state;
        assert!((st.time - 0.501).abs() < 1e-15);
        let VelocitySource::Solve(bc) = &sc.velocity else {
            unreachable!()
        };
        let pin = PressureInputs {
            phi: &st.phi,
            c_prev: &c_prev,
            params: &sc.params,
            f_inj: &sc.f_inj,
            f_prod: &sc.f_prod,
            boundary: bc,
            time: st.time,
        };
        let mut ps = PressureSolver::new(mesh, 1, bc, SolverKind::Direct).unwrap();
        let fresh = ps.solve(mesh, &pin).unwrap();
        let sol = PressureSolution {
            u: st.u.clone(),
            p: st.p.clone().unwrap(),
            lambda: fresh.lambda.clone(),
            diagnostics: fresh.diagnostics,
        };
        assert!(pressure_residual(mesh, &ps, &pin, &sol).unwrap() < 1e-9);
        let cin = ConcentrationInputs {
            phi: &st.phi,
            phi_prev: &phi_prev,
            c_prev: &c_prev,
            u: &st.u,
            params: &sc.params,
            f_inj: &sc.f_inj,
            f_prod: &sc.f_prod,
            boundary: &sc.concentration_bc,
            time: st.time,
            dt: sc.dt,
        };
        let csol = ConcentrationSolution {
            c: st.c.clone(),
            sigma: st.sigma.clone(),
            lambda: st.lambda_c.clone(),
            diagnostics: report.concentration.clone(),
        };
        assert!(sim.concentration.residual(mesh, &cin, &csol).unwrap() < 1e-9);
        assert!(report.mass.relative < 1e-10);
    }

    #[test]
    fn porosity_never_decreases() {
        let mut sim = coupled_sim(3, 0.05);
        let mut prev = sim.state.phi.clone();
        for _ in 0..3 {
            sim.step().unwrap();
            for (a, b) in sim.state.phi.coeffs().iter().zip(prev.coeffs()) {
                assert!(a >= b);
            }
            prev = sim.state.phi.clone();
        }
        assert_eq!(sim.state.step, 3);
    }

    #[test]
    fn failures_carry_the_step() {
        let mut sim = coupled_sim(2, 0.01);
        sim.step().unwrap();
        sim.scenario.velocity = VelocitySource::Prescribed {
            velocity: Arc::new(|_, _| [f64::NAN, 0.0]),
            steady: false,
        };
        match sim.step() {
            Err(Error::Step { step: 2, source }) => {
                assert!(matches!(*source, Error::NonFinite { what: "velocity" }))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn run_until_stops_on_the_last_step() {
        let mut sim = coupled_sim(2, 0.1);
        let mut seen = 0;
        let mut summary = RunSummary::new();
        sim.run_until(0.8, |_, r| {
            seen += 1;
            summary.record(r);
        })
        .unwrap();
        assert_eq!(seen, 3);
        assert_eq!(summary.steps, 3);
        assert!((sim.state.time - 0.8).abs() < 1e-12);
        assert!(summary.phi_min > 0.0 && summary.phi_max < 1.0);
    }
}
