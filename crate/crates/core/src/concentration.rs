//! Upwind mixed hybridized DG step for the concentration `(sigma, c, lambda)`:
//!
//! ```text
//! ([phi D]^-1 sigma, tau) - (c, div tau) + <lambda, tau.n>            = 0
//! ((phi c - phi_prev c_prev)/dt, v) + (div sigma, v) - (c u, grad v)
//!   + <u.n c_hat, v> + ((K (1 - phi) - f_P) c, v)                     = (f_I c_I, v)
//! sum_K <sigma.n + u.n c_hat, mu>                                     = 0
//! ```
//!
//! `c_hat` is `c` where `u.n > 0` and `lambda` elsewhere, decided per
//! quadrature point.

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{dim_p, dim_rt, legendre, ReferenceElement};
use crate::condense::{
    split_locals, system_residual, CondensedOperator, Constraints, LocalSystem, Pattern,
    SolveOptions, TraceLayout,
};
use crate::fields::{DgField, RtField, TraceField, PROJECTION_DEGREE};
use crate::linalg::{FactorCache, SolverKind};
use crate::physics::{Coefficient, ModelParams};
use crate::quadrature::edge_rule;
use crate::{Error, Mesh, Result};

/// Boundary treatment for the concentration trace.
#[derive(Clone, Debug)]
pub enum ConcentrationBc {
    /// Trace fixed to the edge projection of the given data.
    Dirichlet(Coefficient),
    /// Total flux condition `(sigma + u c_hat).n = u.n c_in` at inflow
    /// points and `sigma.n = 0` at outflow points.
    Inflow(Coefficient),
}

/// Velocity sign at one edge quadrature point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeFlow {
    /// Pointwise `u . n` with `n` the element's outward normal.
    pub normal_velocity: f64,
    pub outflow: bool,
}

/// Classifies the quadrature points of local edge `i` of element `t`.
/// `u.n = 0` counts as inflow.
pub fn classify_edge_points(
    mesh: &Mesh,
    re: &ReferenceElement,
    u: &RtField,
    t: usize,
    i: usize,
) -> Vec<EdgeFlow> {
    let len = mesh.geometry(t).edge_normal(i).1;
    edge_flux_density(re, u, t, i)
        .into_iter()
        .map(|f| EdgeFlow {
            normal_velocity: f / len,
            outflow: f > 0.0,
        })
        .collect()
}

/// `|e| u.n` at the edge quadrature points of local edge `i`.
fn edge_flux_density(re: &ReferenceElement, u: &RtField, t: usize, i: usize) -> Vec<f64> {
    let ub = u.block(t);
    re.edges[i]
        .psi_flux
        .iter()
        .map(|row| row.iter().zip(ub).map(|(a, b)| a * b).sum())
        .collect()
}

/// Data for one concentration step ending at `time`.
#[derive(Clone, Copy)]
pub struct ConcentrationInputs<'a> {
    pub phi: &'a DgField,
    pub phi_prev: &'a DgField,
    pub c_prev: &'a DgField,
    pub u: &'a RtField,
    pub params: &'a ModelParams,
    pub f_inj: &'a Coefficient,
    pub f_prod: &'a Coefficient,
    pub boundary: &'a ConcentrationBc,
    pub time: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConcentrationDiagnostics {
    /// Largest interior jump of the total flux `(sigma + u c_hat).n`
    /// moments, relative to the largest one-sided moment.
    pub total_flux_jump: f64,
    /// Same measure for `sigma.n` alone. Not expected to vanish when `u`
    /// is nonzero.
    pub sigma_flux_jump: f64,
    /// `sum <|u.n| (lambda - c), lambda - c>`, nonnegative by construction.
    pub upwind_energy: f64,
    pub solver_residual: f64,
    /// `min (phi / dt - f_P)` over quadrature points; should be positive.
    pub stability_margin: f64,
}

#[derive(Clone, Debug)]
pub struct ConcentrationSolution {
    pub c: DgField,
    pub sigma: RtField,
    pub lambda: TraceField,
    pub diagnostics: ConcentrationDiagnostics,
}

/// Element-local blocks with unknowns ordered `[sigma, c]`.
pub fn assemble_local_concentration(
    mesh: &Mesh,
    re: &ReferenceElement,
    inp: &ConcentrationInputs<'_>,
    t: usize,
) -> Result<LocalSystem> {
    let ns = re.n_rt();
    let nc = re.n_scalar();
    let k1 = re.n_trace();
    let g = mesh.geometry(t);
    let p = inp.params;
    let mut l = LocalSystem::zeros(ns + nc, 3 * k1);
    let phi = inp.phi.values_at(t, &re.phi);
    let u = inp.u.values_at(&g, t, &re.psi);
    for (q, (xi, w)) in re.vol.points.iter().zip(&re.vol.weights).enumerate() {
        let x = g.map(*xi);
        let wd = w * g.det;
        let inv = p.inv_phi_d(phi[q], u[q])?;
        let mut psi = [[0.0; 2]; dim_rt(2)];
        for (o, v) in psi.iter_mut().zip(&re.psi[q]) {
            *o = g.piola(*v);
        }
        for i in 0..ns {
            let a = [
                inv[0][0] * psi[i][0] + inv[1][0] * psi[i][1],
                inv[0][1] * psi[i][0] + inv[1][1] * psi[i][1],
            ];
            for j in 0..ns {
                l.m[(i, j)] += wd * (a[0] * psi[j][0] + a[1] * psi[j][1]);
            }
        }
        for (a, &va) in re.phi[q].iter().enumerate() {
            for j in 0..ns {
                let b = w * re.div_psi[q][j] * va;
                l.m[(j, ns + a)] -= b;
                l.m[(ns + a, j)] += b;
            }
        }
        let react =
            p.reaction_rate(t, x, inp.time) * (1.0 - phi[q]) - inp.f_prod.eval(t, x, inp.time);
        let diag = phi[q] / inp.dt + react;
        let mut grads = [[0.0; 2]; dim_p(2)];
        for (o, d) in grads.iter_mut().zip(&re.dphi[q]) {
            *o = g.push_gradient(*d);
        }
        for a in 0..nc {
            let va = re.phi[q][a];
            let adv = u[q][0] * grads[a][0] + u[q][1] * grads[a][1];
            for b in 0..nc {
                let vb = re.phi[q][b];
                l.m[(ns + a, ns + b)] += wd * (diag * va * vb - vb * adv);
            }
        }
    }
    local_rhs(mesh, re, inp, t, &mut l.f);
    let edges = mesh.element_edges(t);
    for i in 0..3 {
        let tab = &re.edges[i];
        let flux = edge_flux_density(re, inp.u, t, i);
        // Inflow-type boundaries leave only the diffusive flux at outflow
        // points, so it vanishes there.
        let open_outlet = matches!(inp.boundary, ConcentrationBc::Inflow(_))
            && mesh.edges()[edges[i]].boundary.is_some();
        for (q, w) in re.edge_rule.weights.iter().enumerate() {
            let un = w * flux[q];
            for j in 0..k1 {
                let col = i * k1 + j;
                let mu = re.mu[q][j];
                for b in 0..ns {
                    let c = w * tab.psi_flux[q][b] * mu;
                    l.g[(b, col)] += c;
                    l.h[(col, b)] += c;
                }
                if flux[q] > 0.0 {
                    if !open_outlet {
                        for b in 0..nc {
                            l.h[(col, ns + b)] += un * tab.phi[q][b] * mu;
                        }
                    }
                } else {
                    for a in 0..nc {
                        l.g[(ns + a, col)] += un * tab.phi[q][a] * mu;
                    }
                    for jj in 0..k1 {
                        l.e[(col, i * k1 + jj)] += un * mu * re.mu[q][jj];
                    }
                }
            }
            if flux[q] > 0.0 {
                for a in 0..nc {
                    for b in 0..nc {
                        l.m[(ns + a, ns + b)] += un * tab.phi[q][a] * tab.phi[q][b];
                    }
                }
            }
        }
    }
    Ok(l)
}

/// Adds `(f_I c_I + phi_prev c_prev / dt, v)` to the `c` rows of `f`.
fn local_rhs(
    mesh: &Mesh,
    re: &ReferenceElement,
    inp: &ConcentrationInputs<'_>,
    t: usize,
    f: &mut [f64],
) {
    let ns = re.n_rt();
    let g = mesh.geometry(t);
    let phi0 = inp.phi_prev.values_at(t, &re.phi);
    let c0 = inp.c_prev.values_at(t, &re.phi);
    for (q, (xi, w)) in re.vol.points.iter().zip(&re.vol.weights).enumerate() {
        let x = g.map(*xi);
        let source = if inp.f_inj.is_zero() {
            0.0
        } else {
            inp.f_inj.eval(t, x, inp.time) * inp.params.c_inj.eval(t, x, inp.time)
        };
        let v = w * g.det * (source + phi0[q] * c0[q] / inp.dt);
        for (a, &va) in re.phi[q].iter().enumerate() {
            f[ns + a] += v * va;
        }
    }
}

/// Boundary trace data for one step.
pub fn concentration_constraints(
    mesh: &Mesh,
    re: &ReferenceElement,
    u: &RtField,
    boundary: &ConcentrationBc,
    time: f64,
) -> Result<Constraints> {
    let k1 = re.n_trace();
    let mut cons = Constraints::free(mesh.n_edges() * k1);
    match boundary {
        ConcentrationBc::Dirichlet(data) => {
            let rule = edge_rule(PROJECTION_DEGREE)?;
            for (e, edge) in mesh.edges().iter().enumerate() {
                if edge.boundary.is_none() {
                    continue;
                }
                for j in 0..k1 {
                    let m: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(&s, w)| {
                            w * data.eval(edge.owner, mesh.edge_point(e, s), time) * legendre(j, s)
                        })
                        .sum();
                    cons.fixed[e * k1 + j] = Some(m);
                }
            }
        }
        ConcentrationBc::Inflow(c_in) => {
            for (e, edge) in mesh.edges().iter().enumerate() {
                if edge.boundary.is_none() {
                    continue;
                }
                let t = edge.owner;
                let i = local_index(mesh, t, e);
                let sign = mesh.element_signs(t)[i];
                let flux = edge_flux_density(re, u, t, i);
                let g = mesh.geometry(t);
                for (q, w) in re.edge_rule.weights.iter().enumerate() {
                    if flux[q] > 0.0 {
                        continue;
                    }
                    let x = g.map(re.edges[i].points[q]);
                    let v = w * flux[q] * c_in.eval(t, x, time);
                    for j in 0..k1 {
                        let s = if sign < 0.0 && j % 2 == 1 { -1.0 } else { 1.0 };
                        cons.extra_rhs[e * k1 + j] += v * s * re.mu[q][j];
                    }
                }
            }
        }
    }
    Ok(cons)
}

fn local_index(mesh: &Mesh, t: usize, e: usize) -> usize {
    mesh.element_edges(t)
        .iter()
        .position(|&x| x == e)
        .expect("edge belongs to element")
}

/// Reusable solver state. With `freeze_operator`, the condensed operator
/// from the first step is kept and only right-hand sides are rebuilt; valid
/// when `phi`, `u` and the reaction terms do not change between steps.
#[derive(Clone, Debug)]
pub struct ConcentrationSolver {
    k: usize,
    re: ReferenceElement,
    layout: TraceLayout,
    pattern: Pattern,
    kind: SolverKind,
    freeze_operator: bool,
    frozen: Option<CondensedOperator>,
    last: Option<Vec<f64>>,
    cache: FactorCache,
}

impl ConcentrationSolver {
    pub fn new(
        mesh: &Mesh,
        k: usize,
        boundary: &ConcentrationBc,
        kind: SolverKind,
    ) -> Result<Self> {
        let re = ReferenceElement::for_assembly(k)?;
        let layout = TraceLayout::new(mesh, k);
        let mut fixed = vec![false; layout.n_dofs()];
        if let ConcentrationBc::Dirichlet(_) = boundary {
            for (e, edge) in mesh.edges().iter().enumerate() {
                if edge.boundary.is_some() {
                    fixed[e * (k + 1)..(e + 1) * (k + 1)].fill(true);
                }
            }
        }
        let pattern = Pattern::new(&layout, &fixed);
        Ok(ConcentrationSolver {
            k,
            re,
            layout,
            pattern,
            kind,
            freeze_operator: false,
            frozen: None,
            last: None,
            cache: FactorCache::new(),
        })
    }

    pub fn freeze_operator(mut self, yes: bool) -> Self {
        self.freeze_operator = yes;
        self
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.re
    }

    pub fn layout(&self) -> &TraceLayout {
        &self.layout
    }

    pub fn assemble(&self, mesh: &Mesh, inp: &ConcentrationInputs<'_>) -> Result<Vec<LocalSystem>> {
        (0..mesh.n_elements())
            .map(|t| assemble_local_concentration(mesh, &self.re, inp, t))
            .collect()
    }

    pub fn solve(
        &mut self,
        mesh: &Mesh,
        inp: &ConcentrationInputs<'_>,
    ) -> Result<ConcentrationSolution> {
        check_inputs(mesh, self.k, inp)?;
        if !(inp.dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: inp.dt,
            });
        }
        let cons = concentration_constraints(mesh, &self.re, inp.u, inp.boundary, inp.time)?;
        let n_local = self.re.n_rt() + self.re.n_scalar();
        let fresh;
        let (op, f) = match (&self.frozen, self.freeze_operator) {
            (Some(op), true) => {
                let f = (0..mesh.n_elements())
                    .map(|t| {
                        let mut f = vec![0.0; n_local];
                        local_rhs(mesh, &self.re, inp, t, &mut f);
                        f
                    })
                    .collect();
                (op, f)
            }
            _ => {
                let locals = self.assemble(mesh, inp)?;
                let mut op = CondensedOperator::from_locals(&self.layout, &self.pattern, &locals)?;
                let f: Vec<Vec<f64>> = locals.into_iter().map(|l| l.f).collect();
                if self.freeze_operator {
                    if self.kind == SolverKind::Direct {
                        op.factor(&self.pattern)?;
                    }
                    self.frozen = Some(op);
                    (self.frozen.as_ref().unwrap(), f)
                } else {
                    fresh = op;
                    (&fresh, f)
                }
            }
        };
        let r = vec![vec![0.0; 3 * self.re.n_trace()]; mesh.n_elements()];
        let sol = op.solve_with(
            &self.layout,
            &self.pattern,
            &f,
            &r,
            &cons,
            SolveOptions {
                kind: self.kind,
                symmetric: false,
                guess: self.last.as_deref(),
                cache: Some(&mut self.cache),
            },
        )?;
        self.last = Some(sol.traces.clone());
        let (sigma, c) = split_locals(mesh, self.k, &sol.locals, self.re.n_rt())?;
        let lambda = TraceField::from_coeffs(mesh, self.k, sol.traces)?;
        let mut out = ConcentrationSolution {
            c,
            sigma,
            lambda,
            diagnostics: ConcentrationDiagnostics {
                solver_residual: sol.residual,
                stability_margin: stability_margin(mesh, &self.re, inp),
                ..Default::default()
            },
        };
        let (total, sig) = flux_jumps(mesh, &self.re, inp.u, &out);
        out.diagnostics.total_flux_jump = total;
        out.diagnostics.sigma_flux_jump = sig;
        out.diagnostics.upwind_energy = upwind_energy(mesh, &self.re, inp.u, &out);
        Ok(out)
    }

    /// Largest relative residual of every element and trace equation at a
    /// computed solution.
    pub fn residual(
        &self,
        mesh: &Mesh,
        inp: &ConcentrationInputs<'_>,
        sol: &ConcentrationSolution,
    ) -> Result<f64> {
        let locals = self.assemble(mesh, inp)?;
        let cons = concentration_constraints(mesh, &self.re, inp.u, inp.boundary, inp.time)?;
        system_residual(
            &self.layout,
            &locals,
            &cons,
            &sol.sigma,
            &sol.c,
            &sol.lambda,
        )
    }
}

fn check_inputs(mesh: &Mesh, k: usize, inp: &ConcentrationInputs<'_>) -> Result<()> {
    for f in [inp.phi, inp.phi_prev, inp.c_prev] {
        f.check_mesh(mesh)?;
        if f.degree() != k {
            return Err(Error::Mismatch {
                what: "field degree",
                expected: k,
                found: f.degree(),
            });
        }
    }
    inp.u.check_mesh(mesh)?;
    if inp.u.degree() != k {
        return Err(Error::Mismatch {
            what: "velocity degree",
            expected: k,
            found: inp.u.degree(),
        });
    }
    Ok(())
}

fn stability_margin(mesh: &Mesh, re: &ReferenceElement, inp: &ConcentrationInputs<'_>) -> f64 {
    let mut m = f64::INFINITY;
    for t in 0..mesh.n_elements() {
        let g = mesh.geometry(t);
        let phi = inp.phi.values_at(t, &re.phi);
        for (q, xi) in re.vol.points.iter().enumerate() {
            let fp = inp.f_prod.eval(t, g.map(*xi), inp.time);
            m = m.min(phi[q] / inp.dt - fp);
        }
    }
    m
}

/// Outward moments of `sigma.n` and of `u.n c_hat` on local edge `i` of
/// element `t`, against the global-orientation edge basis.
fn side_moments(
    mesh: &Mesh,
    re: &ReferenceElement,
    u: &RtField,
    sol: &ConcentrationSolution,
    t: usize,
    i: usize,
) -> (Vec<f64>, Vec<f64>) {
    let k1 = re.n_trace();
    let e = mesh.element_edges(t)[i];
    let sign = mesh.element_signs(t)[i];
    let orient = |j: usize| if sign < 0.0 && j % 2 == 1 { -1.0 } else { 1.0 };
    let sig: Vec<f64> = sol
        .sigma
        .edge_moments(t, i)
        .iter()
        .enumerate()
        .map(|(j, m)| orient(j) * m)
        .collect();
    let flux = edge_flux_density(re, u, t, i);
    let lam = sol.lambda.local_block(e, sign);
    let cb = sol.c.block(t);
    let mut adv = vec![0.0; k1];
    for (q, w) in re.edge_rule.weights.iter().enumerate() {
        let chat: f64 = if flux[q] > 0.0 {
            re.edges[i].phi[q].iter().zip(cb).map(|(a, b)| a * b).sum()
        } else {
            re.mu[q].iter().zip(&lam).map(|(a, b)| a * b).sum()
        };
        for (j, a) in adv.iter_mut().enumerate() {
            *a += w * flux[q] * chat * re.mu[q][j] * orient(j);
        }
    }
    (sig, adv)
}

/// `(total flux jump, sigma flux jump)`, each relative to its largest
/// one-sided moment.
fn flux_jumps(
    mesh: &Mesh,
    re: &ReferenceElement,
    u: &RtField,
    sol: &ConcentrationSolution,
) -> (f64, f64) {
    let (mut jt, mut st, mut js, mut ss): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for (e, edge) in mesh.edges().iter().enumerate() {
        let Some(nb) = edge.neighbor else { continue };
        let (sa, aa) = side_moments(
            mesh,
            re,
            u,
            sol,
            edge.owner,
            local_index(mesh, edge.owner, e),
        );
        let (sb, ab) = side_moments(mesh, re, u, sol, nb, local_index(mesh, nb, e));
        for j in 0..sa.len() {
            let ta = sa[j] + aa[j];
            let tb = sb[j] + ab[j];
            jt = jt.max((ta + tb).abs());
            st = st.max(ta.abs()).max(tb.abs());
            js = js.max((sa[j] + sb[j]).abs());
            ss = ss.max(sa[j].abs()).max(sb[j].abs());
        }
    }
    let rel = |j: f64, s: f64| if s > 0.0 { j / s } else { j };
    (rel(jt, st), rel(js, ss))
}

fn upwind_energy(
    mesh: &Mesh,
    re: &ReferenceElement,
    u: &RtField,
    sol: &ConcentrationSolution,
) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.n_elements() {
        let cb = sol.c.block(t);
        for i in 0..3 {
            let e = mesh.element_edges(t)[i];
            let lam = sol.lambda.local_block(e, mesh.element_signs(t)[i]);
            let flux = edge_flux_density(re, u, t, i);
            for (q, w) in re.edge_rule.weights.iter().enumerate() {
                let c: f64 = re.edges[i].phi[q].iter().zip(cb).map(|(a, b)| a * b).sum();
                let l: f64 = re.mu[q].iter().zip(&lam).map(|(a, b)| a * b).sum();
                total += w * flux[q].abs() * (l - c) * (l - c);
            }
        }
    }
    total
}

/// Terms of the discrete mass balance over one step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MassBalance {
    pub mass_new: f64,
    pub mass_old: f64,
    /// `dt (f_I c_I, 1)`.
    pub injected: f64,
    /// `dt (f_P c, 1)`, nonpositive for production wells.
    pub produced: f64,
    /// `dt (K (1 - phi) c, 1)`.
    pub reacted: f64,
    /// `dt` times the outward total flux through the domain boundary.
    pub boundary_outflow: f64,
    pub residual: f64,
    pub relative: f64,
}

/// Checks `mass_new - mass_old = injected + produced - reacted - boundary_outflow`,
/// integrating with the assembly quadrature so the identity is exact up to
/// round-off and solver error.
pub fn mass_balance_check(
    mesh: &Mesh,
    re: &ReferenceElement,
    inp: &ConcentrationInputs<'_>,
    sol: &ConcentrationSolution,
) -> MassBalance {
    let mut mb = MassBalance::default();
    let p = inp.params;
    for t in 0..mesh.n_elements() {
        let g = mesh.geometry(t);
        let phi = inp.phi.values_at(t, &re.phi);
        let phi0 = inp.phi_prev.values_at(t, &re.phi);
        let c = sol.c.values_at(t, &re.phi);
        let c0 = inp.c_prev.values_at(t, &re.phi);
        for (q, (xi, w)) in re.vol.points.iter().zip(&re.vol.weights).enumerate() {
            let x = g.map(*xi);
            let wd = w * g.det;
            mb.mass_new += wd * phi[q] * c[q];
            mb.mass_old += wd * phi0[q] * c0[q];
            mb.injected +=
                inp.dt * wd * inp.f_inj.eval(t, x, inp.time) * p.c_inj.eval(t, x, inp.time);
            mb.produced += inp.dt * wd * inp.f_prod.eval(t, x, inp.time) * c[q];
            mb.reacted += inp.dt * wd * p.reaction_rate(t, x, inp.time) * (1.0 - phi[q]) * c[q];
        }
    }
    for (e, edge) in mesh.edges().iter().enumerate() {
        if edge.boundary.is_none() {
            continue;
        }
        let (s, a) = side_moments(
            mesh,
            re,
            inp.u,
            sol,
            edge.owner,
            local_index(mesh, edge.owner, e),
        );
        // Moments against the constant edge function are total fluxes.
        mb.boundary_outflow += inp.dt * (s[0] + a[0]);
    }
    mb.residual =
        (mb.mass_new - mb.mass_old - mb.injected - mb.produced + mb.reacted + mb.boundary_outflow)
            .abs();
    let scale = [
        mb.mass_new,
        mb.mass_old,
        mb.injected,
        mb.produced,
        mb.reacted,
        mb.boundary_outflow,
    ]
    .iter()
    .fold(0.0f64, |m, v| m.max(v.abs()));
    mb.relative = if scale > 0.0 {
        mb.residual / scale
    } else {
        mb.residual
    };
    mb
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condense::monolithic_solve;
    use crate::fields::{l2_project_element, rt_interpolate};
    use crate::manufactured::concentration_cd;
    use crate::{Point, Rect};

    struct Setup {
        mesh: Mesh,
        k: usize,
        phi: DgField,
        phi_prev: DgField,
        c_prev: DgField,
        u: RtField,
        params: ModelParams,
        f_inj: Coefficient,
        f_prod: Coefficient,
        bc: ConcentrationBc,
        dt: f64,
    }

    impl Setup {
        fn new(n: usize, k: usize, u: impl Fn(Point) -> Point) -> Self {
            let mesh = Mesh::build_uniform(n, n, Rect::UNIT).unwrap();
            let mut params = concentration_cd(0.1).params;
            params.c_inj = Coefficient::Constant(0.7);
            Setup {
                phi: DgField::constant(&mesh, k, 1.0),
                phi_prev: DgField::constant(&mesh, k, 1.0),
                c_prev: DgField::zeros(&mesh, k),
                u: rt_interpolate(&u, &mesh, k).unwrap(),
                params,
                f_inj: Coefficient::Constant(0.0),
                f_prod: Coefficient::Constant(0.0),
                bc: ConcentrationBc::Inflow(Coefficient::Constant(0.0)),
                dt: 0.01,
                mesh,
                k,
            }
        }

        fn inputs(&self) -> ConcentrationInputs<'_> {
            ConcentrationInputs {
                phi: &self.phi,
                phi_prev: &self.phi_prev,
                c_prev: &self.c_prev,
                u: &self.u,
                params: &self.params,
                f_inj: &self.f_inj,
                f_prod: &self.f_prod,
                boundary: &self.bc,
                time: 0.0,
                dt: self.dt,
            }
        }

        fn solve(&self) -> (ConcentrationSolver, ConcentrationSolution) {
            let mut s =
                ConcentrationSolver::new(&self.mesh, self.k, &self.bc, SolverKind::Direct).unwrap();
            let sol = s.solve(&self.mesh, &self.inputs()).unwrap();
            (s, sol)
        }
    }

    fn rotation(x: Point) -> Point {
        use core::f64::consts::PI;
        let (s, c) = (libm::sin, libm::cos);
        [s(PI * x[0]) * c(PI * x[1]), -c(PI * x[0]) * s(PI * x[1])]
    }

    #[test]
    fn classification_examples() {
        let s = Setup::new(1, 1, |_| [1.0, 0.0]);
        let re = ReferenceElement::for_assembly(1).unwrap();
        // Element 0 has the right boundary edge.
        for t in 0..2 {
            for i in 0..3 {
                let (n, _) = s.mesh.geometry(t).edge_normal(i);
                let flags = classify_edge_points(&s.mesh, &re, &s.u, t, i);
                for f in flags {
                    assert!((f.normal_velocity - n[0]).abs() < 1e-12);
                    if n[0] > 0.5 {
                        assert!(f.outflow);
                    }
                }
            }
        }
        let z = Setup::new(1, 1, |_| [0.0, 0.0]);
        for i in 0..3 {
            assert!(classify_edge_points(&z.mesh, &re, &z.u, 0, i)
                .iter()
                .all(|f| !f.outflow));
        }
        // u.n changes sign along several edges of this field.
        let r = Setup::new(1, 1, |x| [x[1], x[0] - 0.5]);
        for t in 0..2 {
            let g = r.mesh.geometry(t);
            for i in 0..3 {
                let (n, _) = g.edge_normal(i);
                for (q, f) in classify_edge_points(&r.mesh, &re, &r.u, t, i)
                    .iter()
                    .enumerate()
                {
                    let x = g.map(re.edges[i].points[q]);
                    let exact = x[1] * n[0] + (x[0] - 0.5) * n[1];
                    assert!((f.normal_velocity - exact).abs() < 1e-12);
                    assert_eq!(f.outflow, exact > 0.0);
                }
            }
        }
    }

    #[test]
    fn heat_equation_blocks() {
        let mut s = Setup::new(1, 0, |_| [0.0, 0.0]);
        s.params.dm = 0.25;
        let re = ReferenceElement::for_assembly(0).unwrap();
        for t in 0..2 {
            let l = assemble_local_concentration(&s.mesh, &re, &s.inputs(), t).unwrap();
            let g = s.mesh.geometry(t);
            let v = g.vertices;
            let area = 0.5 * g.det;
            for i in 0..3 {
                for j in 0..3 {
                    let mut mass = 0.0;
                    for e in 0..3 {
                        let a = v[(e + 1) % 3];
                        let b = v[(e + 2) % 3];
                        let m = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                        let p = [m[0] - v[i][0], m[1] - v[i][1]];
                        let q = [m[0] - v[j][0], m[1] - v[j][1]];
                        mass += (p[0] * q[0] + p[1] * q[1]) / (4.0 * area * area) * area / 3.0;
                    }
                    assert!((l.m[(i, j)] - mass / 0.25).abs() < 1e-12);
                }
                assert!((l.m[(i, 3)] + 1.0).abs() < 1e-13);
                assert!((l.m[(3, i)] - 1.0).abs() < 1e-13);
                for q in 0..3 {
                    assert!((l.g[(i, q)] - if i == q { 1.0 } else { 0.0 }).abs() < 1e-13);
                    assert!((l.h[(q, i)] - l.g[(i, q)]).abs() < 1e-13);
                }
            }
            assert!((l.m[(3, 3)] - area / s.dt).abs() < 1e-12);
            assert!(l.f.iter().all(|&v| v == 0.0));
            assert!(l.e.norm_max() == 0.0);
        }
    }

    #[test]
    fn constant_state_is_preserved() {
        for k in 0..=2 {
            let mut s = Setup::new(3, k, |_| [0.0, 0.0]);
            s.c_prev = DgField::constant(&s.mesh, k, 1.0);
            let (_, sol) = s.solve();
            assert!(
                sol.c.coeffs().iter().all(|v| (v - 1.0).abs() < 1e-11),
                "k={k}"
            );
            assert!(sol.sigma.coeffs().iter().all(|v| v.abs() < 1e-11));
            let l = sol.lambda.coeffs();
            for e in 0..s.mesh.n_edges() {
                assert!((l[e * (k + 1)] - 1.0).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn closed_box_conserves_mass() {
        for k in 0..=1 {
            let mut s = Setup::new(4, k, rotation);
            s.phi_prev = DgField::constant(&s.mesh, k, 0.4);
            s.phi = l2_project_element(&|x| 0.5 + 0.1 * x[0] * x[1], &s.mesh, k).unwrap();
            s.c_prev =
                l2_project_element(&|x| libm::exp(-x[0]) * (1.0 + x[1]), &s.mesh, k).unwrap();
            let (_, sol) = s.solve();
            let re = ReferenceElement::for_assembly(k).unwrap();
            let mb = mass_balance_check(&s.mesh, &re, &s.inputs(), &sol);
            assert!(mb.relative < 1e-10, "k={k}: {mb:?}");
            assert!(((mb.mass_new - mb.mass_old) / mb.mass_old).abs() < 1e-10);
            assert!(mb.boundary_outflow.abs() < 1e-12);
            assert!(sol.diagnostics.total_flux_jump < 1e-9);
        }
    }

    #[test]
    fn zero_fields_balance_trivially() {
        let s = Setup::new(2, 0, |_| [0.0, 0.0]);
        let (solver, sol) = s.solve();
        let mb = mass_balance_check(&s.mesh, solver.reference(), &s.inputs(), &sol);
        assert_eq!(mb.residual, 0.0);
        assert!(sol.c.coeffs().iter().all(|&v| v == 0.0));
    }

    fn sourced(n: usize, k: usize, dirichlet: bool) -> Setup {
        let mut s = Setup::new(n, k, |x| [0.6 + x[1], 0.3 - x[0]]);
        s.phi_prev = l2_project_element(&|x| 0.3 + 0.2 * x[0], &s.mesh, k).unwrap();
        s.phi = l2_project_element(&|x| 0.35 + 0.2 * x[0] + 0.1 * x[1], &s.mesh, k).unwrap();
        s.c_prev = l2_project_element(&|x| libm::sin(3.0 * x[0]) * x[1], &s.mesh, k).unwrap();
        s.params.reaction_override = Some(Coefficient::function(|x, _| 0.5 + x[0]));
        s.f_inj = Coefficient::function(|x, _| if x[0] < 0.5 { 2.0 } else { 0.0 });
        s.f_prod = Coefficient::function(|x, _| -x[1]);
        s.params.c_inj = Coefficient::function(|x, _| 1.0 + x[1]);
        if dirichlet {
            s.bc = ConcentrationBc::Dirichlet(Coefficient::function(|x, _| x[0] * x[1]));
        } else {
            s.bc = ConcentrationBc::Inflow(Coefficient::function(|x, _| 0.5 + x[1]));
        }
        s
    }

    #[test]
    fn condensed_matches_monolithic() {
        for (n, k) in [(2, 0), (2, 1), (4, 0), (4, 1)] {
            for dirichlet in [false, true] {
                let s = sourced(n, k, dirichlet);
                let (solver, sol) = s.solve();
                let locals = solver.assemble(&s.mesh, &s.inputs()).unwrap();
                let cons = concentration_constraints(&s.mesh, solver.reference(), &s.u, &s.bc, 0.0)
                    .unwrap();
                let mono = monolithic_solve(solver.layout(), &locals, &cons).unwrap();
                for (a, b) in sol.lambda.coeffs().iter().zip(&mono.traces) {
                    assert!((a - b).abs() < 1e-10, "n={n} k={k}");
                }
                let ns = solver.reference().n_rt();
                for (t, loc) in mono.locals.iter().enumerate() {
                    for (a, b) in sol.sigma.block(t).iter().zip(&loc[..ns]) {
                        assert!((a - b).abs() < 1e-10);
                    }
                    for (a, b) in sol.c.block(t).iter().zip(&loc[ns..]) {
                        assert!((a - b).abs() < 1e-10);
                    }
                }
                assert!(solver.residual(&s.mesh, &s.inputs(), &sol).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn sourced_step_balances_mass() {
        for k in 0..=2 {
            for dirichlet in [false, true] {
                let s = sourced(5, k, dirichlet);
                let (solver, sol) = s.solve();
                let mb = mass_balance_check(&s.mesh, solver.reference(), &s.inputs(), &sol);
                assert!(mb.relative < 1e-10, "k={k}: {mb:?}");
                assert!(mb.injected > 0.0 && mb.reacted != 0.0);
                let d = &sol.diagnostics;
                assert!(d.total_flux_jump < 1e-9, "{d:?}");
                assert!(d.upwind_energy >= 0.0);
                assert!(d.stability_margin > 0.0);
            }
        }
    }

    #[test]
    fn frozen_operator_matches_fresh() {
        let mut s = sourced(4, 1, false);
        s.params.reaction_override = Some(Coefficient::Constant(0.0));
        let mut frozen = ConcentrationSolver::new(&s.mesh, 1, &s.bc, SolverKind::Direct)
            .unwrap()
            .freeze_operator(true);
        let mut fresh = ConcentrationSolver::new(&s.mesh, 1, &s.bc, SolverKind::Direct).unwrap();
        for _ in 0..3 {
            let a = frozen.solve(&s.mesh, &s.inputs()).unwrap();
            let b = fresh.solve(&s.mesh, &s.inputs()).unwrap();
            assert!(a
                .c
                .sub(&b.c)
                .unwrap()
                .coeffs()
                .iter()
                .all(|v| v.abs() < 1e-12));
            s.c_prev = a.c;
        }
    }

    #[test]
    fn iterative_matches_direct() {
        let s = sourced(4, 1, false);
        let (_, a) = s.solve();
        let kind = SolverKind::Iterative(crate::linalg::IterativeOptions::default());
        let mut it = ConcentrationSolver::new(&s.mesh, 1, &s.bc, kind).unwrap();
        let b = it.solve(&s.mesh, &s.inputs()).unwrap();
        assert!(a
            .c
            .sub(&b.c)
            .unwrap()
            .coeffs()
            .iter()
            .all(|v| v.abs() < 1e-9));
    }
}
