//! Acid injection into a square carbonate sample: a high-permeability spot
//! on the inlet side grows into a dissolution channel.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::basis::ReferenceElement;
use crate::concentration::ConcentrationBc;
use crate::driver::{PorosityMode, RunSummary, Scenario, Simulator, StepReport, VelocitySource};
use crate::fields::DgField;
use crate::linalg::SolverKind;
use crate::physics::{Coefficient, ModelParams};
use crate::pressure::{PressureBc, PressureBoundary};
use crate::{Error, Mesh, Point, Rect, Result};

/// Porosity threshold that marks dissolved rock.
pub const CHANNEL_POROSITY: f64 = 0.5;

/// Initial rock properties overridden on the elements touching `point`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Heterogeneity {
    pub point: Point,
    pub porosity: f64,
    pub permeability: f64,
}

/// Volumetric source (positive) or sink (negative) at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Well {
    pub point: Point,
    pub rate: f64,
}

/// How a well rate becomes a source density on its elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WellScaling {
    /// The integral over the well elements equals the rate.
    Integral,
    /// The density on the well elements equals the rate.
    Pointwise,
}

#[derive(Clone, Debug)]
pub struct WormholeConfig {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
    pub k: usize,
    pub dt: f64,
    pub final_time: f64,
    pub snapshot_times: Vec<f64>,
    /// `phi0` and `kappa0` are replaced by the per-element fields built
    /// from `porosity`, `permeability` and `heterogeneities`.
    pub params: ModelParams,
    pub porosity: f64,
    pub permeability: f64,
    pub heterogeneities: Vec<Heterogeneity>,
    pub wells: Vec<Well>,
    pub well_scaling: WellScaling,
    /// Inflow speed through the left side; `None` closes it.
    pub inlet_velocity: Option<f64>,
    /// Pressure held on the right side.
    pub outlet_pressure: f64,
    /// Concentration of the injected acid, at wells and inlet.
    pub injected_concentration: f64,
    pub initial_concentration: f64,
    pub solver: SolverKind,
}

impl Default for WormholeConfig {
    /// The 0.2 m sample on an 80 x 80 grid, with both the inlet and the two
    /// wells active.
    fn default() -> Self {
        WormholeConfig {
            rect: Rect::new(0.0, 0.0, 0.2, 0.2),
            nx: 80,
            ny: 80,
            k: 0,
            dt: 0.1,
            final_time: 40.0,
            snapshot_times: vec![10.0, 20.0, 30.0, 40.0],
            params: ModelParams {
                mu: 0.01,
                rho_s: 2500.0,
                alpha: 100.0,
                a0: 2.0,
                kappa0: Coefficient::Constant(1e-9),
                phi0: Coefficient::Constant(0.3),
                kappa_c: 1.0,
                kappa_s: 10.0,
                dm: 1e-5,
                dl: 0.0,
                dt: 0.0,
                c_inj: Coefficient::Constant(1.0),
                reaction_override: None,
            },
            porosity: 0.3,
            permeability: 1e-9,
            heterogeneities: vec![Heterogeneity {
                point: [0.0, 0.1],
                porosity: 0.6,
                permeability: 1e-7,
            }],
            wells: vec![
                Well {
                    point: [0.0, 0.1],
                    rate: 1.0,
                },
                Well {
                    point: [0.2, 0.1],
                    rate: -1.0,
                },
            ],
            well_scaling: WellScaling::Integral,
            inlet_velocity: Some(0.02),
            outlet_pressure: 0.0,
            injected_concentration: 1.0,
            initial_concentration: 0.0,
            solver: SolverKind::Direct,
        }
    }
}

impl WormholeConfig {
    /// Inlet injection only, no wells.
    pub fn boundary_only() -> Self {
        WormholeConfig {
            wells: Vec::new(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::check_degree(self.k)?;
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidMesh("no cells"));
        }
        let positive = [
            ("dt", self.dt),
            ("permeability", self.permeability),
            ("final_time", self.final_time),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if self.final_time < self.dt {
            return Err(Error::InvalidParameter {
                name: "final_time",
                value: self.final_time,
            });
        }
        let porosities =
            core::iter::once(self.porosity).chain(self.heterogeneities.iter().map(|h| h.porosity));
        for value in porosities {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "porosity",
                    value,
                });
            }
        }
        for h in &self.heterogeneities {
            if !(h.permeability > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "permeability",
                    value: h.permeability,
                });
            }
        }
        Ok(())
    }
}

/// Elements touching `x`; errors when `x` lies outside the mesh.
fn point_elements(mesh: &Mesh, x: Point) -> Result<Vec<usize>> {
    let els = mesh.elements_containing(x);
    if els.is_empty() {
        Err(Error::Domain {
            what: "point outside the domain",
            value: x[0],
        })
    } else {
        Ok(els)
    }
}

/// Source density per element from the injectors (or the producers).
fn well_density(
    mesh: &Mesh,
    wells: &[Well],
    scaling: WellScaling,
    injector: bool,
) -> Result<Coefficient> {
    let mut values = vec![0.0; mesh.n_elements()];
    let mut any = false;
    for w in wells
        .iter()
        .filter(|w| (w.rate > 0.0) == injector && w.rate != 0.0)
    {
        let els = point_elements(mesh, w.point)?;
        let area: f64 = els.iter().map(|&t| mesh.geometry(t).area()).sum();
        let density = match scaling {
            WellScaling::Integral => w.rate / area,
            WellScaling::Pointwise => w.rate,
        };
        for t in els {
            values[t] += density;
        }
        any = true;
    }
    Ok(if any {
        Coefficient::per_element(values)
    } else {
        Coefficient::Constant(0.0)
    })
}

/// Per-element initial porosity and permeability.
pub fn initial_rock(mesh: &Mesh, cfg: &WormholeConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut phi = vec![cfg.porosity; mesh.n_elements()];
    let mut kappa = vec![cfg.permeability; mesh.n_elements()];
    for h in &cfg.heterogeneities {
        for t in point_elements(mesh, h.point)? {
            phi[t] = h.porosity;
            kappa[t] = h.permeability;
        }
    }
    Ok((phi, kappa))
}

fn piecewise_constant(mesh: &Mesh, k: usize, values: &[f64]) -> DgField {
    let mut f = DgField::zeros(mesh, k);
    for (t, &v) in values.iter().enumerate() {
        f.block_mut(t).fill(v);
    }
    f
}

/// Builds the scenario and the initial porosity and concentration.
pub fn wormhole_scenario(cfg: &WormholeConfig) -> Result<(Scenario, DgField, DgField)> {
    cfg.validate()?;
    let mesh = Mesh::build_uniform(cfg.nx, cfg.ny, cfg.rect)?;
    let (phi0, kappa0) = initial_rock(&mesh, cfg)?;
    let mut params = cfg.params.clone();
    params.phi0 = Coefficient::per_element(phi0.clone());
    params.kappa0 = Coefficient::per_element(kappa0);
    params.c_inj = Coefficient::Constant(cfg.injected_concentration);
    let no_flow = PressureBc::NormalFlux(Coefficient::Constant(0.0));
    let inlet = match cfg.inlet_velocity {
        // Outward normal flux on the left side is minus the inflow speed.
        Some(v) => PressureBc::NormalFlux(Coefficient::Constant(-v)),
        None => no_flow.clone(),
    };
    let boundary = PressureBoundary {
        left: inlet,
        right: PressureBc::Dirichlet(Coefficient::Constant(cfg.outlet_pressure)),
        bottom: no_flow.clone(),
        top: no_flow,
    };
    let scenario = Scenario {
        k: cfg.k,
        params,
        f_inj: well_density(&mesh, &cfg.wells, cfg.well_scaling, true)?,
        f_prod: well_density(&mesh, &cfg.wells, cfg.well_scaling, false)?,
        velocity: VelocitySource::Solve(boundary),
        porosity: PorosityMode::Evolve,
        concentration_bc: ConcentrationBc::Inflow(Coefficient::Constant(
            cfg.injected_concentration,
        )),
        dt: cfg.dt,
        solver: cfg.solver,
        freeze_concentration_operator: false,
        mesh,
    };
    let phi = piecewise_constant(&scenario.mesh, cfg.k, &phi0);
    let c = DgField::constant(&scenario.mesh, cfg.k, cfg.initial_concentration);
    Ok((scenario, phi, c))
}

/// Largest centroid `x` over the dissolved elements (element mean porosity
/// above [`CHANNEL_POROSITY`]) edge-connected to one of `seeds`; `None`
/// if no seed is dissolved.
pub fn channel_tip(mesh: &Mesh, phi: &DgField, seeds: &[usize]) -> Option<f64> {
    let re = ReferenceElement::new(phi.degree(), phi.degree().max(1)).ok()?;
    let open: Vec<bool> = (0..mesh.n_elements())
        .map(|t| phi.element_mean(&re, t) > CHANNEL_POROSITY)
        .collect();
    let mut seen = vec![false; mesh.n_elements()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in seeds {
        if open[s] && !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    let mut tip: Option<f64> = None;
    while let Some(t) = queue.pop_front() {
        let x = mesh.geometry(t).centroid()[0];
        tip = Some(tip.map_or(x, |m| m.max(x)));
        for i in 0..3 {
            if let Some(n) = mesh.neighbor_across(t, i) {
                if open[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    tip
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub time: f64,
    pub phi: DgField,
    pub c: DgField,
    pub channel_tip: Option<f64>,
}

/// Per-step record of the quantities the checks look at.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WormholeStep {
    pub step: usize,
    pub time: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    /// Mean porosity over the elements of the first heterogeneity.
    pub seed_porosity: f64,
    pub channel_tip: Option<f64>,
    pub mass_relative: f64,
    pub velocity_jump: f64,
    pub total_flux_jump: f64,
}

#[derive(Clone, Debug)]
pub struct WormholeRun {
    pub mesh: Mesh,
    pub snapshots: Vec<Snapshot>,
    pub steps: Vec<WormholeStep>,
    pub summary: RunSummary,
}

impl WormholeRun {
    /// True if the tip never moves left between steps (a tip that
    /// disappears counts as a retreat).
    pub fn tip_nondecreasing(&self) -> bool {
        let mut last = f64::NEG_INFINITY;
        for s in &self.steps {
            match s.channel_tip {
                Some(x) if x >= last => last = x,
                _ => return false,
            }
        }
        true
    }

    pub fn final_tip(&self) -> Option<f64> {
        self.steps.last().and_then(|s| s.channel_tip)
    }
}

/// Runs the scenario to `final_time`, keeping the fields at each snapshot
/// time; `observe` sees every step.
pub fn run_wormhole(
    cfg: &WormholeConfig,
    mut observe: impl FnMut(&WormholeStep),
) -> Result<WormholeRun> {
    let (scenario, phi, c) = wormhole_scenario(cfg)?;
    let seeds = match cfg.heterogeneities.first() {
        Some(h) => point_elements(&scenario.mesh, h.point)?,
        None => match cfg.wells.iter().find(|w| w.rate > 0.0) {
            Some(w) => point_elements(&scenario.mesh, w.point)?,
            None => Vec::new(),
        },
    };
    let re = ReferenceElement::new(cfg.k, cfg.k.max(1))?;
    let mesh = scenario.mesh.clone();
    let mut sim = Simulator::new(scenario, phi, c, 0.0)?;
    let mut pending: Vec<f64> = cfg.snapshot_times.clone();
    pending.sort_by(f64::total_cmp);
    pending.reverse();
    let half = 0.5 * cfg.dt;
    let mut snapshots = Vec::new();
    let mut steps = Vec::new();
    let mut summary = RunSummary::new();
    // Snapshots requested at or before the start.
    while pending.last().is_some_and(|&t| t <= half) {
        let t = pending.pop().unwrap_or_default();
        let st = sim.state();
        snapshots.push(Snapshot {
            time: t,
            phi: st.phi.clone(),
            c: st.c.clone(),
            channel_tip: channel_tip(&mesh, &st.phi, &seeds),
        });
    }
    let mut record = |st: &crate::driver::TimeState, r: &StepReport| {
        summary.record(r);
        let seed_porosity = if seeds.is_empty() {
            f64::NAN
        } else {
            seeds
                .iter()
                .map(|&t| st.phi.element_mean(&re, t))
                .sum::<f64>()
                / seeds.len() as f64
        };
        let tip = channel_tip(&mesh, &st.phi, &seeds);
        let s = WormholeStep {
            step: r.step,
            time: r.time,
            phi_min: r.phi_min,
            phi_max: r.phi_max,
            seed_porosity,
            channel_tip: tip,
            mass_relative: r.mass.relative,
            velocity_jump: r.pressure.as_ref().map_or(0.0, |p| p.flux_jump),
            total_flux_jump: r.concentration.total_flux_jump,
        };
        observe(&s);
        steps.push(s);
        while pending.last().is_some_and(|&t| t <= r.time + half) {
            let t = pending.pop().unwrap_or_default();
            snapshots.push(Snapshot {
                time: t,
                phi: st.phi.clone(),
                c: st.c.clone(),
                channel_tip: tip,
            });
        }
    };
    sim.run_until(cfg.final_time, &mut record)?;
    Ok(WormholeRun {
        mesh,
        snapshots,
        steps,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(cells: usize) -> WormholeConfig {
        WormholeConfig {
            nx: cells,
            ny: cells,
            dt: 0.1,
            final_time: 1.0,
            snapshot_times: vec![0.5, 1.0],
            ..WormholeConfig::default()
        }
    }

    #[test]
    fn wells_balance_and_heterogeneity_touches_inlet_point() {
        let cfg = small(8);
        let (sc, phi, _) = wormhole_scenario(&cfg).unwrap();
        let mesh = &sc.mesh;
        let integral = |c: &Coefficient| -> f64 {
            (0..mesh.n_elements())
                .map(|t| {
                    let g = mesh.geometry(t);
                    c.eval(t, g.centroid(), 0.0) * g.area()
                })
                .sum()
        };
        assert!((integral(&sc.f_inj) - 1.0).abs() < 1e-12);
        assert!((integral(&sc.f_prod) + 1.0).abs() < 1e-12);
        let els = mesh.elements_containing([0.0, 0.1]);
        assert!(!els.is_empty());
        for t in 0..mesh.n_elements() {
            let want = if els.contains(&t) { 0.6 } else { 0.3 };
            assert!(phi.block(t).iter().all(|&v| v == want));
        }
    }

    #[test]
    fn nothing_happens_without_acid_or_flow() {
        let cfg = WormholeConfig {
            wells: Vec::new(),
            inlet_velocity: None,
            ..small(6)
        };
        let run = run_wormhole(&cfg, |_| {}).unwrap();
        let (sc, phi0, _) = wormhole_scenario(&cfg).unwrap();
        let last = run.snapshots.last().unwrap();
        assert_eq!(last.phi.coeffs(), phi0.coeffs());
        assert!(last.c.coeffs().iter().all(|&v| v.abs() < 1e-14));
        assert_eq!(run.steps.len(), 10);
        assert_eq!(sc.k, 0);
    }

    #[test]
    fn short_run_keeps_bounds_and_grows_seed() {
        let cfg = small(10);
        let run = run_wormhole(&cfg, |_| {}).unwrap();
        assert_eq!(run.snapshots.len(), 2);
        let mut prev = 0.6;
        for s in &run.steps {
            assert!(s.phi_min > 0.0 && s.phi_max < 1.0);
            assert!(s.seed_porosity > prev);
            prev = s.seed_porosity;
            assert!(s.mass_relative < 1e-10, "{}", s.mass_relative);
            assert!(s.velocity_jump < 1e-9);
            assert!(s.total_flux_jump < 1e-9);
        }
        assert!(run.tip_nondecreasing());
    }

    #[test]
    fn tip_follows_connected_dissolved_elements() {
        let mesh = Mesh::build_uniform(4, 1, Rect::new(0.0, 0.0, 4.0, 1.0)).unwrap();
        let mut vals = vec![0.2; mesh.n_elements()];
        // Open the first two columns only.
        for t in 0..mesh.n_elements() {
            if mesh.geometry(t).centroid()[0] < 2.0 {
                vals[t] = 0.9;
            }
        }
        let phi = piecewise_constant(&mesh, 0, &vals);
        let seed = mesh.elements_containing([0.1, 0.5]);
        let tip = channel_tip(&mesh, &phi, &seed).unwrap();
        assert!(tip > 1.0 && tip < 2.0);
        let closed = piecewise_constant(&mesh, 0, &vec![0.2; mesh.n_elements()]);
        assert_eq!(channel_tip(&mesh, &closed, &seed), None);
    }
}
