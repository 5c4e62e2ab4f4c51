//! Hybrid mixed pressure solve for `(u, p, lambda)`:
//!
//! ```text
//! (beta(phi) u, tau) - (p, div tau) + <lambda, tau.n> = 0
//! (div u, v)                                       = (f - r, v)
//! sum_K <u.n, mu>                                  = 0 or boundary data
//! ```
//!
//! with `beta = mu / kappa(phi)` and reaction `r = alpha K (1-phi) c_bar / rho_s`.

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{dim_rt, global_param, legendre, ReferenceElement};
use crate::condense::{
    split_locals, system_residual, CondensedOperator, Constraints, LocalSystem, Pattern,
    SolveOptions, TraceLayout,
};
use crate::fields::{l2_norm_rt, DgField, RtField, TraceField};
use crate::linalg::{FactorCache, SolverKind};
use crate::physics::{cutoff, Coefficient, ModelParams};
use crate::quadrature::edge_rule;
use crate::{BoundaryTag, Error, Mesh, Result};

/// Boundary condition on one side of the rectangle.
#[derive(Clone, Debug)]
pub enum PressureBc {
    /// Prescribed pressure trace.
    Dirichlet(Coefficient),
    /// Prescribed outward normal flux `u . n`; zero is no-flow.
    NormalFlux(Coefficient),
}

#[derive(Clone, Debug)]
pub struct PressureBoundary {
    pub left: PressureBc,
    pub right: PressureBc,
    pub bottom: PressureBc,
    pub top: PressureBc,
}

impl PressureBoundary {
    pub fn uniform(bc: PressureBc) -> Self {
        PressureBoundary {
            left: bc.clone(),
            right: bc.clone(),
            bottom: bc.clone(),
            top: bc,
        }
    }

    pub fn side(&self, tag: BoundaryTag) -> &PressureBc {
        match tag {
            BoundaryTag::Left => &self.left,
            BoundaryTag::Right => &self.right,
            BoundaryTag::Bottom => &self.bottom,
            BoundaryTag::Top => &self.top,
        }
    }
}

/// Data for one pressure solve at time `time`.
#[derive(Clone, Copy)]
pub struct PressureInputs<'a> {
    pub phi: &'a DgField,
    /// Last step's concentration; clamped before use.
    pub c_prev: &'a DgField,
    pub params: &'a ModelParams,
    /// Total source `f = f_I + f_P`, as two parts.
    pub f_inj: &'a Coefficient,
    pub f_prod: &'a Coefficient,
    pub boundary: &'a PressureBoundary,
    pub time: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PressureDiagnostics {
    /// Largest interior-edge jump moment of `u.n`, relative to the largest
    /// one-sided moment.
    pub flux_jump: f64,
    pub flux_scale: f64,
    /// Relative residual of the condensed linear system.
    pub solver_residual: f64,
}

#[derive(Clone, Debug)]
pub struct PressureSolution {
    pub u: RtField,
    pub p: DgField,
    pub lambda: TraceField,
    pub diagnostics: PressureDiagnostics,
}

/// Element-local blocks with unknowns ordered `[u, p]`.
pub fn assemble_local_pressure(
    mesh: &Mesh,
    re: &ReferenceElement,
    inp: &PressureInputs<'_>,
    t: usize,
) -> Result<LocalSystem> {
    let nu = re.n_rt();
    let np = re.n_scalar();
    let k1 = re.n_trace();
    let nt = 3 * k1;
    let g = mesh.geometry(t);
    let mut l = LocalSystem::zeros(nu + np, nt);
    let phi_c = inp.phi.block(t);
    let c_c = inp.c_prev.block(t);
    let p = inp.params;
    for (q, (xi, w)) in re.vol.points.iter().zip(&re.vol.weights).enumerate() {
        let x = g.map(*xi);
        let phi: f64 = re.phi[q].iter().zip(phi_c).map(|(a, b)| a * b).sum();
        let c_bar = cutoff(re.phi[q].iter().zip(c_c).map(|(a, b)| a * b).sum());
        let beta = p.beta_at(phi, t, x)?;
        let mut psi = [[0.0; 2]; dim_rt(2)];
        for (o, v) in psi.iter_mut().zip(&re.psi[q]) {
            *o = g.piola(*v);
        }
        let wd = w * g.det;
        for i in 0..nu {
            for j in i..nu {
                let v = wd * beta * (psi[i][0] * psi[j][0] + psi[i][1] * psi[j][1]);
                l.m[(i, j)] += v;
                if i != j {
                    l.m[(j, i)] += v;
                }
            }
        }
        for (a, &va) in re.phi[q].iter().enumerate() {
            for j in 0..nu {
                // (div psi_j, v_a): divergence scales by 1/det.
                let b = w * re.div_psi[q][j] * va;
                l.m[(nu + a, j)] -= b;
                l.m[(j, nu + a)] -= b;
            }
        }
        let react = p.dissolution_rate(t, x, inp.time) * (1.0 - phi) * c_bar;
        let f = inp.f_inj.eval(t, x, inp.time) + inp.f_prod.eval(t, x, inp.time);
        for (a, &va) in re.phi[q].iter().enumerate() {
            l.f[nu + a] -= wd * (f - react) * va;
        }
    }
    for i in 0..3 {
        let tab = &re.edges[i];
        for (q, w) in re.edge_rule.weights.iter().enumerate() {
            for j in 0..k1 {
                let mu = re.mu[q][j];
                for a in 0..nu {
                    let c = w * tab.psi_flux[q][a] * mu;
                    l.g[(a, i * k1 + j)] += c;
                    l.h[(i * k1 + j, a)] -= c;
                }
            }
        }
    }
    Ok(l)
}

/// Trace data for the boundary: Dirichlet sides fix `lambda` to the edge
/// projection, flux sides add `-<g, mu>` to their trace rows.
pub fn pressure_constraints(
    mesh: &Mesh,
    k: usize,
    boundary: &PressureBoundary,
    time: f64,
) -> Result<Constraints> {
    let k1 = k + 1;
    let rule = edge_rule(crate::fields::PROJECTION_DEGREE)?;
    let mut cons = Constraints::free(mesh.n_edges() * k1);
    for (e, edge) in mesh.edges().iter().enumerate() {
        let Some(tag) = edge.boundary else { continue };
        let mut moments = vec![0.0; k1];
        let data = match boundary.side(tag) {
            PressureBc::Dirichlet(c) | PressureBc::NormalFlux(c) => c,
        };
        for (&s, w) in rule.points.iter().zip(&rule.weights) {
            let v = data.eval(edge.owner, mesh.edge_point(e, s), time);
            for (j, m) in moments.iter_mut().enumerate() {
                *m += w * v * legendre(j, s);
            }
        }
        match boundary.side(tag) {
            PressureBc::Dirichlet(_) => {
                for j in 0..k1 {
                    cons.fixed[e * k1 + j] = Some(moments[j]);
                }
            }
            PressureBc::NormalFlux(_) => {
                for j in 0..k1 {
                    cons.extra_rhs[e * k1 + j] -= edge.length * moments[j];
                }
            }
        }
    }
    Ok(cons)
}

/// Reusable solver state for one mesh, degree and boundary-type layout.
#[derive(Clone, Debug)]
pub struct PressureSolver {
    k: usize,
    re: ReferenceElement,
    layout: TraceLayout,
    pattern: Pattern,
    kind: SolverKind,
    last: Option<Vec<f64>>,
    cache: FactorCache,
}

impl PressureSolver {
    pub fn new(
        mesh: &Mesh,
        k: usize,
        boundary: &PressureBoundary,
        kind: SolverKind,
    ) -> Result<Self> {
        let re = ReferenceElement::for_assembly(k)?;
        let layout = TraceLayout::new(mesh, k);
        let cons = pressure_constraints(mesh, k, boundary, 0.0)?;
        let pattern = Pattern::new(&layout, &cons.fixed_mask());
        Ok(PressureSolver {
            k,
            re,
            layout,
            pattern,
            kind,
            last: None,
            cache: FactorCache::new(),
        })
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.re
    }

    pub fn layout(&self) -> &TraceLayout {
        &self.layout
    }

    pub fn assemble(&self, mesh: &Mesh, inp: &PressureInputs<'_>) -> Result<Vec<LocalSystem>> {
        (0..mesh.n_elements())
            .map(|t| assemble_local_pressure(mesh, &self.re, inp, t))
            .collect()
    }

    pub fn solve(&mut self, mesh: &Mesh, inp: &PressureInputs<'_>) -> Result<PressureSolution> {
        check_inputs(mesh, self.k, inp)?;
        let locals = self.assemble(mesh, inp)?;
        let cons = pressure_constraints(mesh, self.k, inp.boundary, inp.time)?;
        let op = CondensedOperator::from_locals(&self.layout, &self.pattern, &locals)?;
        let f: Vec<Vec<f64>> = locals.iter().map(|l| l.f.clone()).collect();
        let r: Vec<Vec<f64>> = locals.iter().map(|l| l.r.clone()).collect();
        let sol = op.solve_with(
            &self.layout,
            &self.pattern,
            &f,
            &r,
            &cons,
            SolveOptions {
                kind: self.kind,
                symmetric: true,
                guess: self.last.as_deref(),
                cache: Some(&mut self.cache),
            },
        )?;
        self.last = Some(sol.traces.clone());
        let (u, p) = split_locals(mesh, self.k, &sol.locals, self.re.n_rt())?;
        let lambda = TraceField::from_coeffs(mesh, self.k, sol.traces)?;
        let (flux_jump, flux_scale) = normal_flux_jump(mesh, &u);
        Ok(PressureSolution {
            u,
            p,
            lambda,
            diagnostics: PressureDiagnostics {
                flux_jump,
                flux_scale,
                solver_residual: sol.residual,
            },
        })
    }
}

fn check_inputs(mesh: &Mesh, k: usize, inp: &PressureInputs<'_>) -> Result<()> {
    inp.phi.check_mesh(mesh)?;
    inp.c_prev.check_mesh(mesh)?;
    for d in [inp.phi.degree(), inp.c_prev.degree()] {
        if d != k {
            return Err(Error::Mismatch {
                what: "field degree",
                expected: k,
                found: d,
            });
        }
    }
    Ok(())
}

/// Edge moments of `w . n_e` against the global-orientation Legendre basis,
/// seen from local edge `i` of element `t` (outward normal of `t`).
pub fn outward_moments(mesh: &Mesh, w: &RtField, t: usize, i: usize) -> Vec<f64> {
    let sg = mesh.element_signs(t)[i];
    w.edge_moments(t, i)
        .iter()
        .enumerate()
        .map(|(j, &m)| if sg < 0.0 && j % 2 == 1 { -m } else { m })
        .collect()
}

/// Largest interior jump of the normal moments of `w`, relative to the
/// largest one-sided moment; returns `(relative jump, scale)`.
pub fn normal_flux_jump(mesh: &Mesh, w: &RtField) -> (f64, f64) {
    let mut jump: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (e, edge) in mesh.edges().iter().enumerate() {
        let side = |t: usize| {
            let i = mesh.element_edges(t).iter().position(|&x| x == e).unwrap();
            outward_moments(mesh, w, t, i)
        };
        let a = side(edge.owner);
        scale = a.iter().fold(scale, |m, v| m.max(v.abs()));
        if let Some(nb) = edge.neighbor {
            let b = side(nb);
            scale = b.iter().fold(scale, |m, v| m.max(v.abs()));
            for (x, y) in a.iter().zip(&b) {
                jump = jump.max((x + y).abs());
            }
        }
    }
    (if scale > 0.0 { jump / scale } else { jump }, scale)
}

/// Re-evaluates every element and trace equation at a computed solution;
/// returns the largest residual relative to the largest equation term.
pub fn pressure_residual(
    mesh: &Mesh,
    solver: &PressureSolver,
    inp: &PressureInputs<'_>,
    sol: &PressureSolution,
) -> Result<f64> {
    let locals = solver.assemble(mesh, inp)?;
    let cons = pressure_constraints(mesh, solver.k, inp.boundary, inp.time)?;
    system_residual(&solver.layout, &locals, &cons, &sol.u, &sol.p, &sol.lambda)
}

/// `||u_h||` convenience for scaling diagnostics.
pub fn velocity_norm(mesh: &Mesh, sol: &PressureSolution) -> Result<f64> {
    l2_norm_rt(&sol.u, mesh)
}

/// Local-orientation Legendre value, used by callers that integrate
/// against the trace basis from an element side.
pub fn trace_basis_local(j: usize, sign: f64, s_local: f64) -> f64 {
    legendre(j, global_param(sign, s_local))
}
