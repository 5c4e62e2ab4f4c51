//! JSON scenario files.
//!
//! Every block rejects unknown keys. Missing optional values take the
//! defaults of the named case; [`ScenarioConfig::resolved`] fills them in
//! so the manifest records exactly what ran.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use wormhole_core::linalg::{IterativeOptions, SolverKind};
use wormhole_core::manufactured::{manufactured_case, ManufacturedCase};
use wormhole_core::physics::{Coefficient, ModelParams};
use wormhole_core::wormhole::{Heterogeneity, Well, WellScaling, WormholeConfig};
use wormhole_core::{Rect, SUPPORTED_DEGREES};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseName {
    PressureElliptic,
    ConcentrationCd,
    Coupled,
    Wormhole,
}

impl CaseName {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseName::PressureElliptic => "pressure_elliptic",
            CaseName::ConcentrationCd => "concentration_cd",
            CaseName::Coupled => "coupled",
            CaseName::Wormhole => "wormhole",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshBlock {
    /// Cells per side for each level of a convergence study.
    pub cells: Option<Vec<usize>>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    /// `[x0, y0, x1, y1]`.
    pub rect: Option<[f64; 4]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationBlock {
    pub k: Option<usize>,
    pub degrees: Option<Vec<usize>>,
    pub dt: Option<f64>,
    pub final_time: Option<f64>,
}

/// Overrides of the model parameters; absent keys keep the case values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsBlock {
    pub viscosity: Option<f64>,
    pub solid_density: Option<f64>,
    pub dissolving_power: Option<f64>,
    pub interfacial_area: Option<f64>,
    pub permeability: Option<f64>,
    pub porosity: Option<f64>,
    pub mass_transfer: Option<f64>,
    pub surface_reaction: Option<f64>,
    pub molecular_diffusion: Option<f64>,
    pub longitudinal_dispersivity: Option<f64>,
    pub transverse_dispersivity: Option<f64>,
    pub injected_concentration: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeterogeneityBlock {
    pub point: [f64; 2],
    pub porosity: f64,
    pub permeability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WellBlock {
    pub point: [f64; 2],
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WellScalingName {
    Integral,
    Pointwise,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WormholeBlock {
    pub heterogeneities: Option<Vec<HeterogeneityBlock>>,
    pub wells: Option<Vec<WellBlock>>,
    pub well_scaling: Option<WellScalingName>,
    /// Inflow speed through the left side; `0` closes it.
    pub inlet_velocity: Option<f64>,
    pub outlet_pressure: Option<f64>,
    pub initial_concentration: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverName {
    Direct,
    Iterative,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub kind: Option<SolverName>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapshotFormat {
    VtkLegacyAscii,
    CsvPoints,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: Option<String>,
    pub snapshot_times: Option<Vec<f64>>,
    pub formats: Option<Vec<SnapshotFormat>>,
}

/// Pass/fail thresholds; a missing entry is not checked.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksBlock {
    /// Smallest acceptable observed order per field, indexed by degree.
    pub min_order: Option<std::collections::BTreeMap<String, Vec<f64>>>,
    /// Largest distance of observed rates from the reference ones.
    pub rate_tolerance: Option<f64>,
    /// Largest ratio (either way) of errors to the reference ones.
    pub error_factor: Option<f64>,
    /// Fields compared with the reference tables; all when absent.
    pub reference_fields: Option<Vec<String>>,
    pub max_mass_residual: Option<f64>,
    pub max_flux_jump: Option<f64>,
    pub min_channel_tip: Option<f64>,
    pub tip_nondecreasing: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub case: CaseName,
    /// Diffusion coefficient of the convection-diffusion case.
    pub diffusion: Option<f64>,
    #[serde(default)]
    pub mesh: MeshBlock,
    #[serde(default)]
    pub discretization: DiscretizationBlock,
    #[serde(default)]
    pub physics: PhysicsBlock,
    pub wormhole: Option<WormholeBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub checks: ChecksBlock,
}

pub fn parse_config_str(text: &str, path: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: shown.clone(),
        source,
    })?;
    parse_config_str(&text, &shown)
}

fn check_positive(key: &str, v: Option<f64>) -> Result<(), ConfigError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => {
            Err(invalid(key, format!("{x} must be positive")))
        }
        _ => Ok(()),
    }
}

fn check_degree(key: &str, k: usize) -> Result<(), ConfigError> {
    if SUPPORTED_DEGREES.contains(&k) {
        Ok(())
    } else {
        Err(invalid(
            key,
            format!("unsupported degree {k} (use 0, 1 or 2)"),
        ))
    }
}

impl ScenarioConfig {
    pub fn is_study(&self) -> bool {
        self.case != CaseName::Wormhole
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.discretization;
        if d.k.is_some() && d.degrees.is_some() {
            return Err(invalid(
                "discretization.k",
                "give `k` or `degrees`, not both",
            ));
        }
        if let Some(k) = d.k {
            check_degree("discretization.k", k)?;
        }
        if let Some(ks) = &d.degrees {
            if ks.is_empty() {
                return Err(invalid("discretization.degrees", "empty"));
            }
            for &k in ks {
                check_degree("discretization.degrees", k)?;
            }
        }
        check_positive("discretization.dt", d.dt)?;
        check_positive("discretization.final_time", d.final_time)?;
        if let (Some(dt), Some(t)) = (d.dt, d.final_time) {
            if t < dt {
                return Err(invalid(
                    "discretization.final_time",
                    "shorter than one step",
                ));
            }
        }
        if let Some(cells) = &self.mesh.cells {
            if cells.is_empty() || cells.contains(&0) {
                return Err(invalid("mesh.cells", "needs positive cell counts"));
            }
        }
        for (key, v) in [("mesh.nx", self.mesh.nx), ("mesh.ny", self.mesh.ny)] {
            if v == Some(0) {
                return Err(invalid(key, "must be positive"));
            }
        }
        if let Some([x0, y0, x1, y1]) = self.mesh.rect {
            if !(x1 > x0 && y1 > y0) {
                return Err(invalid("mesh.rect", "needs x1 > x0 and y1 > y0"));
            }
        }
        check_positive("diffusion", self.diffusion)?;
        let p = &self.physics;
        for (key, v) in [
            ("physics.viscosity", p.viscosity),
            ("physics.solid_density", p.solid_density),
            ("physics.dissolving_power", p.dissolving_power),
            ("physics.interfacial_area", p.interfacial_area),
            ("physics.permeability", p.permeability),
            ("physics.mass_transfer", p.mass_transfer),
            ("physics.surface_reaction", p.surface_reaction),
            ("physics.molecular_diffusion", p.molecular_diffusion),
        ] {
            check_positive(key, v)?;
        }
        if let Some(phi) = p.porosity {
            if !(phi > 0.0 && phi < 1.0) {
                return Err(invalid("physics.porosity", "must lie in (0, 1)"));
            }
        }
        if let Some(t) = &self.solver.tolerance {
            check_positive("solver.tolerance", Some(*t))?;
        }
        if self.is_study() {
            if self.wormhole.is_some() {
                return Err(invalid("wormhole", "only allowed with case \"wormhole\""));
            }
            if self.mesh.nx.is_some() || self.mesh.ny.is_some() {
                return Err(invalid("mesh.nx", "studies take `mesh.cells`"));
            }
            if self.mesh.rect.is_some() {
                return Err(invalid("mesh.rect", "fixed by the manufactured case"));
            }
        } else {
            if self.mesh.cells.is_some() {
                return Err(invalid(
                    "mesh.cells",
                    "the wormhole run takes `nx` and `ny`",
                ));
            }
            if d.degrees.as_ref().is_some_and(|v| v.len() != 1) {
                return Err(invalid(
                    "discretization.degrees",
                    "the wormhole run takes one degree",
                ));
            }
            if self.diffusion.is_some() {
                return Err(invalid("diffusion", "use physics.molecular_diffusion"));
            }
        }
        if self.case != CaseName::ConcentrationCd && self.diffusion.is_some() {
            return Err(invalid("diffusion", "only used by concentration_cd"));
        }
        if let Some(w) = &self.wormhole {
            for h in w.heterogeneities.iter().flatten() {
                if !(h.porosity > 0.0 && h.porosity < 1.0) {
                    return Err(invalid(
                        "wormhole.heterogeneities.porosity",
                        "must lie in (0, 1)",
                    ));
                }
                check_positive(
                    "wormhole.heterogeneities.permeability",
                    Some(h.permeability),
                )?;
            }
            if let Some(v) = w.inlet_velocity {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(invalid("wormhole.inlet_velocity", "must be nonnegative"));
                }
            }
        }
        if let Some(times) = &self.output.snapshot_times {
            if times.iter().any(|t| !(*t >= 0.0)) {
                return Err(invalid("output.snapshot_times", "must be nonnegative"));
            }
        }
        Ok(())
    }

    /// Copy with every default written out.
    pub fn resolved(&self) -> ScenarioConfig {
        let mut r = self.clone();
        let d = &mut r.discretization;
        let study = self.is_study();
        let (dt, t, cells, degrees): (f64, f64, Vec<usize>, Vec<usize>) = match self.case {
            CaseName::PressureElliptic => (1.0, 1.0, vec![10, 20, 40], vec![0, 1, 2]),
            CaseName::ConcentrationCd => (1e-4, 1.0, vec![10, 20, 40], vec![0, 1]),
            CaseName::Coupled => (1e-4, 1.0, vec![5, 10, 20, 40], vec![1]),
            CaseName::Wormhole => (0.1, 40.0, Vec::new(), vec![0]),
        };
        d.dt.get_or_insert(dt);
        d.final_time.get_or_insert(t);
        if study {
            if let Some(k) = d.k.take() {
                d.degrees = Some(vec![k]);
            }
            d.degrees.get_or_insert(degrees);
            r.mesh.cells.get_or_insert(cells);
        } else {
            if let Some(ks) = d.degrees.take() {
                d.k = ks.first().copied();
            }
            d.k.get_or_insert(0);
            r.mesh.nx.get_or_insert(80);
            r.mesh.ny.get_or_insert(80);
            r.mesh.rect.get_or_insert([0.0, 0.0, 0.2, 0.2]);
            let def = WormholeConfig::default();
            let w = r.wormhole.get_or_insert_with(WormholeBlock::default);
            w.heterogeneities.get_or_insert_with(|| {
                def.heterogeneities
                    .iter()
                    .map(|h| HeterogeneityBlock {
                        point: h.point,
                        porosity: h.porosity,
                        permeability: h.permeability,
                    })
                    .collect()
            });
            w.wells.get_or_insert_with(|| {
                def.wells
                    .iter()
                    .map(|w| WellBlock {
                        point: w.point,
                        rate: w.rate,
                    })
                    .collect()
            });
            w.well_scaling.get_or_insert(WellScalingName::Integral);
            w.inlet_velocity
                .get_or_insert(def.inlet_velocity.unwrap_or(0.0));
            w.outlet_pressure.get_or_insert(def.outlet_pressure);
            w.initial_concentration
                .get_or_insert(def.initial_concentration);
            r.output
                .snapshot_times
                .get_or_insert_with(|| def.snapshot_times.clone());
        }
        if self.case == CaseName::ConcentrationCd {
            r.diffusion.get_or_insert(1.0);
        }
        r.solver.kind.get_or_insert(SolverName::Direct);
        if r.solver.kind == Some(SolverName::Iterative) {
            let it = IterativeOptions::default();
            r.solver.tolerance.get_or_insert(it.rel_tol);
            r.solver.max_iterations.get_or_insert(it.max_iter);
        }
        r.output.directory.get_or_insert_with(|| "out".to_string());
        r.output
            .formats
            .get_or_insert_with(|| vec![SnapshotFormat::VtkLegacyAscii, SnapshotFormat::CsvPoints]);
        r
    }

    pub fn solver_kind(&self) -> SolverKind {
        match self.solver.kind {
            Some(SolverName::Iterative) => {
                let mut it = IterativeOptions::default();
                if let Some(t) = self.solver.tolerance {
                    it.rel_tol = t;
                }
                if let Some(m) = self.solver.max_iterations {
                    it.max_iter = m;
                }
                SolverKind::Iterative(it)
            }
            _ => SolverKind::Direct,
        }
    }

    /// The manufactured case with physics overrides applied.
    pub fn manufactured(&self) -> anyhow::Result<ManufacturedCase> {
        let mut case = manufactured_case(self.case.as_str(), self.diffusion.unwrap_or(1.0))?;
        apply_physics(&self.physics, &mut case.params);
        Ok(case)
    }

    pub fn wormhole_config(&self) -> WormholeConfig {
        let r = self.resolved();
        let mut cfg = WormholeConfig::default();
        let d = &r.discretization;
        cfg.k = d.k.unwrap_or(0);
        cfg.dt = d.dt.unwrap_or(cfg.dt);
        cfg.final_time = d.final_time.unwrap_or(cfg.final_time);
        cfg.nx = r.mesh.nx.unwrap_or(cfg.nx);
        cfg.ny = r.mesh.ny.unwrap_or(cfg.ny);
        if let Some([x0, y0, x1, y1]) = r.mesh.rect {
            cfg.rect = Rect::new(x0, y0, x1, y1);
        }
        apply_physics(&r.physics, &mut cfg.params);
        if let Some(phi) = r.physics.porosity {
            cfg.porosity = phi;
        }
        if let Some(kappa) = r.physics.permeability {
            cfg.permeability = kappa;
        }
        if let Some(c) = r.physics.injected_concentration {
            cfg.injected_concentration = c;
        }
        if let Some(w) = &r.wormhole {
            if let Some(hs) = &w.heterogeneities {
                cfg.heterogeneities = hs
                    .iter()
                    .map(|h| Heterogeneity {
                        point: h.point,
                        porosity: h.porosity,
                        permeability: h.permeability,
                    })
                    .collect();
            }
            if let Some(ws) = &w.wells {
                cfg.wells = ws
                    .iter()
                    .map(|w| Well {
                        point: w.point,
                        rate: w.rate,
                    })
                    .collect();
            }
            cfg.well_scaling = match w.well_scaling {
                Some(WellScalingName::Pointwise) => WellScaling::Pointwise,
                _ => WellScaling::Integral,
            };
            cfg.inlet_velocity = match w.inlet_velocity {
                Some(v) if v > 0.0 => Some(v),
                Some(_) => None,
                None => cfg.inlet_velocity,
            };
            if let Some(p) = w.outlet_pressure {
                cfg.outlet_pressure = p;
            }
            if let Some(c) = w.initial_concentration {
                cfg.initial_concentration = c;
            }
        }
        if let Some(times) = &r.output.snapshot_times {
            cfg.snapshot_times = times.clone();
        }
        cfg.solver = r.solver_kind();
        cfg
    }
}

fn apply_physics(p: &PhysicsBlock, m: &mut ModelParams) {
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut m.mu, p.viscosity);
    set(&mut m.rho_s, p.solid_density);
    set(&mut m.alpha, p.dissolving_power);
    set(&mut m.a0, p.interfacial_area);
    set(&mut m.kappa_c, p.mass_transfer);
    set(&mut m.kappa_s, p.surface_reaction);
    set(&mut m.dm, p.molecular_diffusion);
    set(&mut m.dl, p.longitudinal_dispersivity);
    set(&mut m.dt, p.transverse_dispersivity);
    if let Some(v) = p.permeability {
        m.kappa0 = Coefficient::Constant(v);
    }
    if let Some(v) = p.porosity {
        m.phi0 = Coefficient::Constant(v);
    }
    if let Some(v) = p.injected_concentration {
        m.c_inj = Coefficient::Constant(v);
    }
}

/// The configuration a subcommand uses when no file is given.
pub fn builtin(case: CaseName, diffusion: Option<f64>) -> ScenarioConfig {
    let mut min_order = std::collections::BTreeMap::new();
    let mut checks = ChecksBlock {
        max_mass_residual: Some(1e-10),
        max_flux_jump: Some(1e-9),
        ..Default::default()
    };
    match case {
        CaseName::PressureElliptic => {
            checks.rate_tolerance = Some(0.25);
            checks.error_factor = Some(2.0);
            checks.max_mass_residual = None;
        }
        CaseName::ConcentrationCd if diffusion.unwrap_or(1.0) == 1.0 => {
            min_order.insert("c".to_string(), vec![0.75, 1.75]);
            min_order.insert("sigma".to_string(), vec![0.75, 1.75]);
            checks.error_factor = Some(3.0);
            checks.reference_fields = Some(vec!["c".to_string()]);
        }
        CaseName::ConcentrationCd => {
            min_order.insert("c".to_string(), vec![0.9, 1.8]);
        }
        CaseName::Coupled => {
            for f in ["p", "u", "phi", "c"] {
                min_order.insert(f.to_string(), vec![1.75, 1.75, 1.75]);
            }
        }
        CaseName::Wormhole => {
            checks.min_channel_tip = Some(0.05);
            checks.tip_nondecreasing = Some(true);
        }
    }
    if !min_order.is_empty() {
        checks.min_order = Some(min_order);
    }
    ScenarioConfig {
        case,
        diffusion,
        mesh: MeshBlock::default(),
        discretization: DiscretizationBlock::default(),
        physics: PhysicsBlock::default(),
        wormhole: None,
        solver: SolverBlock::default(),
        output: OutputBlock::default(),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_a_parse_error() {
        match parse_config_str("", "x.json") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unsupported_degree_is_named() {
        let e = parse_config_str(
            r#"{"case": "pressure_elliptic", "discretization": {"degrees": [1, 5]}}"#,
            "x.json",
        )
        .unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("discretization.degrees") && msg.contains("unsupported degree"));
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let text = "{\n  \"case\": \"coupled\",\n  \"mesh\": {\"celss\": [4]}\n}";
        match parse_config_str(text, "x.json") {
            Err(ConfigError::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("celss"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resolution_fills_study_defaults() {
        let cfg = parse_config_str(r#"{"case": "concentration_cd"}"#, "x").unwrap();
        let r = cfg.resolved();
        assert_eq!(r.mesh.cells, Some(vec![10, 20, 40]));
        assert_eq!(r.discretization.degrees, Some(vec![0, 1]));
        assert_eq!(r.diffusion, Some(1.0));
        assert_eq!(r.resolved(), r);
    }

    #[test]
    fn wormhole_defaults_match_the_library() {
        let cfg = parse_config_str(r#"{"case": "wormhole"}"#, "x").unwrap();
        let w = cfg.wormhole_config();
        let d = WormholeConfig::default();
        assert_eq!((w.nx, w.ny, w.k), (d.nx, d.ny, d.k));
        assert_eq!(w.wells, d.wells);
        assert_eq!(w.heterogeneities, d.heterogeneities);
        assert_eq!(w.inlet_velocity, d.inlet_velocity);
        assert_eq!(w.snapshot_times, d.snapshot_times);
    }

    #[test]
    fn misplaced_blocks_are_rejected() {
        for text in [
            r#"{"case": "coupled", "wormhole": {}}"#,
            r#"{"case": "wormhole", "mesh": {"cells": [4]}}"#,
            r#"{"case": "coupled", "diffusion": 0.1}"#,
            r#"{"case": "coupled", "discretization": {"dt": 0.1, "final_time": 0.01}}"#,
        ] {
            assert!(matches!(
                parse_config_str(text, "x"),
                Err(ConfigError::Invalid { .. })
            ));
        }
    }
}
