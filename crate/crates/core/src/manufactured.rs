//! Manufactured solutions with closed-form sources for verification.

use alloc::string::ToString;
use alloc::sync::Arc;
use core::f64::consts::PI;

use libm::{cos, exp, sin};

use crate::physics::{Coefficient, ModelParams};
use crate::{Error, Point, Rect, Result};

pub type ScalarFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(Point, f64) -> Point + Send + Sync>;

/// Which sub-problem a case exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseKind {
    /// Steady pressure solve only.
    Pressure,
    /// Concentration transport with a prescribed velocity and porosity.
    Concentration,
    /// The full porosity / pressure / concentration loop.
    Coupled,
}

#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub kind: CaseKind,
    pub params: ModelParams,
    pub rect: Rect,
    pub final_time: f64,
    pub f_inj: Coefficient,
    pub f_prod: Coefficient,
    pub pressure: ScalarFn,
    pub velocity: VectorFn,
    pub concentration: ScalarFn,
    pub porosity: ScalarFn,
    /// Diffusive flux `-phi D grad c`.
    pub flux: VectorFn,
}

impl core::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("final_time", &self.final_time)
            .finish_non_exhaustive()
    }
}

/// Looks up a case by name; `diffusion` applies to `concentration_cd`.
pub fn manufactured_case(name: &str, diffusion: f64) -> Result<ManufacturedCase> {
    match name {
        "pressure_elliptic" => Ok(pressure_elliptic()),
        "concentration_cd" => Ok(concentration_cd(diffusion)),
        "coupled" => Ok(coupled()),
        other => Err(Error::UnknownCase(other.to_string())),
    }
}

fn unit_params() -> ModelParams {
    ModelParams {
        mu: 1.0,
        rho_s: 1.0,
        alpha: 1.0,
        a0: 1.0,
        kappa0: 1.0.into(),
        phi0: 0.5.into(),
        kappa_c: 1.0,
        kappa_s: 1.0,
        dm: 1.0,
        dl: 0.0,
        dt: 0.0,
        c_inj: 1.0.into(),
        reaction_override: Some(Coefficient::Constant(0.0)),
    }
}

fn sinsin(x: Point) -> f64 {
    sin(PI * x[0]) * sin(PI * x[1])
}

/// `p = sin(pi x) sin(pi y)`, unit permeability, no reaction.
pub fn pressure_elliptic() -> ManufacturedCase {
    // Constant porosity equal to phi0 keeps kappa = kappa0 = 1.
    let params = unit_params();
    let grad = |x: Point| {
        [
            PI * cos(PI * x[0]) * sin(PI * x[1]),
            PI * sin(PI * x[0]) * cos(PI * x[1]),
        ]
    };
    ManufacturedCase {
        name: "pressure_elliptic",
        kind: CaseKind::Pressure,
        params,
        rect: Rect::UNIT,
        final_time: 0.0,
        f_inj: Coefficient::function(|x, _| 2.0 * PI * PI * sinsin(x)),
        f_prod: Coefficient::Constant(0.0),
        pressure: Arc::new(|x, _| sinsin(x)),
        velocity: Arc::new(move |x, _| {
            let g = grad(x);
            [-g[0], -g[1]]
        }),
        concentration: Arc::new(|_, _| 0.0),
        porosity: Arc::new(|_, _| 0.5),
        flux: Arc::new(|_, _| [0.0, 0.0]),
    }
}

/// `c = e^(t-x-y) sin(pi x) sin(pi y)` transported by `u = (y, x)` with
/// `D = d I`, `phi = 1`, `f_P = -x`, `c_I = 1`.
pub fn concentration_cd(d: f64) -> ManufacturedCase {
    let mut params = unit_params();
    params.dm = d;
    let c = |x: Point, t: f64| exp(t - x[0] - x[1]) * sinsin(x);
    let grad_c = |x: Point, t: f64| {
        let e = exp(t - x[0] - x[1]);
        let s = sinsin(x);
        [
            e * (-s + PI * cos(PI * x[0]) * sin(PI * x[1])),
            e * (-s + PI * sin(PI * x[0]) * cos(PI * x[1])),
        ]
    };
    let lap_c = |x: Point, t: f64| {
        let e = exp(t - x[0] - x[1]);
        let s = sinsin(x);
        let mixed = cos(PI * x[0]) * sin(PI * x[1]) + sin(PI * x[0]) * cos(PI * x[1]);
        e * (2.0 * s - 2.0 * PI * mixed - 2.0 * PI * PI * s)
    };
    let f_inj = move |x: Point, t: f64| {
        let g = grad_c(x, t);
        let cv = c(x, t);
        // c_t + u . grad c - d lap c + x c, with c_t = c.
        cv + x[1] * g[0] + x[0] * g[1] - d * lap_c(x, t) + x[0] * cv
    };
    ManufacturedCase {
        name: "concentration_cd",
        kind: CaseKind::Concentration,
        params,
        rect: Rect::UNIT,
        final_time: 1.0,
        f_inj: Coefficient::function(f_inj),
        f_prod: Coefficient::function(|x, _| -x[0]),
        pressure: Arc::new(|_, _| 0.0),
        velocity: Arc::new(|x, _| [x[1], x[0]]),
        concentration: Arc::new(c),
        porosity: Arc::new(|_, _| 1.0),
        flux: Arc::new(move |x, t| {
            let g = grad_c(x, t);
            [-d * g[0], -d * g[1]]
        }),
    }
}

/// Exact state of the coupled case and the derivatives its sources need.
#[derive(Clone, Copy, Debug)]
pub struct CoupledPoint {
    pub p: f64,
    pub grad_p: Point,
    pub lap_p: f64,
    pub c: f64,
    pub c_t: f64,
    pub grad_c: Point,
    pub lap_c: f64,
    pub phi: f64,
    pub phi_t: f64,
    pub grad_phi: Point,
    pub kappa: f64,
    pub grad_ln_kappa: Point,
    /// Lumped reaction rate `K`.
    pub k_react: f64,
}

const COUPLED_D: f64 = 1e-2;
const COUPLED_RHO_S: f64 = 10.0;
const COUPLED_A0: f64 = 0.5;

impl CoupledPoint {
    pub fn at(x: Point, t: f64) -> Self {
        let (px, py) = (x[0], x[1]);
        let bx = px * px * (1.0 - px) * (1.0 - px);
        let by = py * py * (1.0 - py) * (1.0 - py);
        let dbx = 2.0 * px * (1.0 - px) * (1.0 - 2.0 * px);
        let dby = 2.0 * py * (1.0 - py) * (1.0 - 2.0 * py);
        let ddbx = 2.0 - 12.0 * px + 12.0 * px * px;
        let ddby = 2.0 - 12.0 * py + 12.0 * py * py;
        let g = bx * by;
        let grad_g = [dbx * by, bx * dby];
        let lap_g = ddbx * by + bx * ddby;

        let w = px + py + 1.0;
        let ew = exp(w);
        let big_e = t * t * g * ew / 80.0 + w;
        let grad_e = [
            t * t * ew * (grad_g[0] + g) / 80.0 + 1.0,
            t * t * ew * (grad_g[1] + g) / 80.0 + 1.0,
        ];
        let e_t = 2.0 * t * g * ew / 80.0;
        let one_minus_phi = exp(-big_e);
        let phi = 1.0 - one_minus_phi;
        let phi0 = 1.0 - exp(-w);
        let grad_phi = [one_minus_phi * grad_e[0], one_minus_phi * grad_e[1]];
        let phi_t = one_minus_phi * e_t;

        // kappa = phi^3 (1-phi0)^2 / (phi0^3 (1-phi)^2) with kappa0 = 1.
        let kappa =
            phi * phi * phi * exp(-2.0 * w) / (phi0 * phi0 * phi0 * one_minus_phi * one_minus_phi);
        let dphi0 = exp(-w);
        let grad_ln_kappa = [
            3.0 * grad_phi[0] / phi + 2.0 * grad_e[0] - 2.0 - 3.0 * dphi0 / phi0,
            3.0 * grad_phi[1] / phi + 2.0 * grad_e[1] - 2.0 - 3.0 * dphi0 / phi0,
        ];

        let s = sinsin(x);
        CoupledPoint {
            p: t * s,
            grad_p: [
                t * PI * cos(PI * px) * sin(PI * py),
                t * PI * sin(PI * px) * cos(PI * py),
            ],
            lap_p: -2.0 * PI * PI * t * s,
            c: t * g,
            c_t: g,
            grad_c: [t * grad_g[0], t * grad_g[1]],
            lap_c: t * lap_g,
            phi,
            phi_t,
            grad_phi,
            kappa,
            grad_ln_kappa,
            k_react: COUPLED_A0 * ew * 0.5,
        }
    }

    pub fn velocity(&self) -> Point {
        [-self.kappa * self.grad_p[0], -self.kappa * self.grad_p[1]]
    }

    /// `div u` for `u = -kappa grad p`.
    pub fn div_u(&self) -> f64 {
        let g = self.grad_ln_kappa;
        -self.kappa * (g[0] * self.grad_p[0] + g[1] * self.grad_p[1] + self.lap_p)
    }

    /// Total source `f = div u + alpha K (1 - phi) c / rho_s`.
    pub fn source(&self) -> f64 {
        self.div_u() + self.k_react * (1.0 - self.phi) * self.c / COUPLED_RHO_S
    }

    /// Injected concentration that balances the transport equation with
    /// `f_I = 1` and `f_P = f - 1`.
    pub fn injected_concentration(&self) -> f64 {
        let u = self.velocity();
        let f_prod = self.source() - 1.0;
        let d_phic_dt = self.phi_t * self.c + self.phi * self.c_t;
        let div_uc = self.c * self.div_u() + u[0] * self.grad_c[0] + u[1] * self.grad_c[1];
        let div_diff = COUPLED_D
            * (self.grad_phi[0] * self.grad_c[0]
                + self.grad_phi[1] * self.grad_c[1]
                + self.phi * self.lap_c);
        d_phic_dt + div_uc - div_diff + self.k_react * (1.0 - self.phi) * self.c - f_prod * self.c
    }
}

/// `p = t sin sin`, `c = t x^2(1-x)^2 y^2(1-y)^2` and the matching porosity
/// `phi = 1 - exp(-(t^2 g e^w / 80 + w))`, `w = x + y + 1`.
pub fn coupled() -> ManufacturedCase {
    let params = ModelParams {
        mu: 1.0,
        rho_s: COUPLED_RHO_S,
        alpha: 1.0,
        a0: COUPLED_A0,
        kappa0: 1.0.into(),
        phi0: Coefficient::function(|x, _| 1.0 - exp(-(x[0] + x[1] + 1.0))),
        kappa_c: 1.0,
        kappa_s: 1.0,
        dm: COUPLED_D,
        dl: 0.0,
        dt: 0.0,
        c_inj: Coefficient::function(|x, t| CoupledPoint::at(x, t).injected_concentration()),
        reaction_override: None,
    };
    ManufacturedCase {
        name: "coupled",
        kind: CaseKind::Coupled,
        params,
        rect: Rect::UNIT,
        final_time: 1.0,
        f_inj: Coefficient::Constant(1.0),
        f_prod: Coefficient::function(|x, t| CoupledPoint::at(x, t).source() - 1.0),
        pressure: Arc::new(|x, t| CoupledPoint::at(x, t).p),
        velocity: Arc::new(|x, t| CoupledPoint::at(x, t).velocity()),
        concentration: Arc::new(|x, t| CoupledPoint::at(x, t).c),
        porosity: Arc::new(|x, t| CoupledPoint::at(x, t).phi),
        flux: Arc::new(|x, t| {
            let s = CoupledPoint::at(x, t);
            [
                -COUPLED_D * s.phi * s.grad_c[0],
                -COUPLED_D * s.phi * s.grad_c[1],
            ]
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::permeability;

    // Deterministic pseudo-random points in the open unit square.
    fn points(n: usize) -> impl Iterator<Item = (Point, f64)> {
        let mut s: u64 = 0x9e3779b97f4a7c15;
        (0..n).map(move |_| {
            let mut next = || {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                0.05 + 0.9 * ((s >> 11) as f64 / (1u64 << 53) as f64)
            };
            ([next(), next()], next())
        })
    }

    const H: f64 = 1e-4;

    fn d_dx(f: &dyn Fn(Point, f64) -> f64, x: Point, t: f64, i: usize) -> f64 {
        let mut a = x;
        let mut b = x;
        a[i] += H;
        b[i] -= H;
        (f(a, t) - f(b, t)) / (2.0 * H)
    }

    fn d_dt(f: &dyn Fn(Point, f64) -> f64, x: Point, t: f64) -> f64 {
        (f(x, t + H) - f(x, t - H)) / (2.0 * H)
    }

    /// Finite-difference divergence of a vector field.
    fn div(f: &dyn Fn(Point, f64) -> Point, x: Point, t: f64) -> f64 {
        d_dx(&|y, s| f(y, s)[0], x, t, 0) + d_dx(&|y, s| f(y, s)[1], x, t, 1)
    }

    #[test]
    fn unknown_case_rejected() {
        assert!(matches!(
            manufactured_case("nope", 1.0),
            Err(Error::UnknownCase(_))
        ));
        assert_eq!(
            manufactured_case("coupled", 1.0).unwrap().kind,
            CaseKind::Coupled
        );
    }

    #[test]
    fn pressure_case_residual() {
        let c = pressure_elliptic();
        for (x, _) in points(100) {
            let u = (c.velocity)(x, 0.0);
            let p = &*c.pressure;
            assert!((u[0] + d_dx(p, x, 0.0, 0)).abs() < 1e-6);
            assert!((u[1] + d_dx(p, x, 0.0, 1)).abs() < 1e-6);
            let f = c.f_inj.eval(0, x, 0.0);
            assert!((div(&*c.velocity, x, 0.0) - f).abs() < 1e-6 * (1.0 + f.abs()));
        }
    }

    #[test]
    fn concentration_case_residual() {
        for d in [1.0, 0.01] {
            let cs = concentration_cd(d);
            let c = &*cs.concentration;
            for (x, t) in points(100) {
                assert!(div(&*cs.velocity, x, t).abs() < 1e-9);
                let u = (cs.velocity)(x, t);
                let adv = u[0] * d_dx(c, x, t, 0) + u[1] * d_dx(c, x, t, 1);
                let lhs = d_dt(c, x, t) + adv + div(&*cs.flux, x, t);
                let rhs = cs.f_prod.eval(0, x, t) * c(x, t) + cs.f_inj.eval(0, x, t);
                assert!((lhs - rhs).abs() < 1e-6 * (1.0 + rhs.abs()), "d={d}");
            }
        }
    }

    #[test]
    fn coupled_case_residuals() {
        let cs = coupled();
        let p = &cs.params;
        for (x, t) in points(100) {
            let s = CoupledPoint::at(x, t);
            let phi = &*cs.porosity;
            let c = &*cs.concentration;
            // Porosity equation with the lumped rate from the parameters.
            let k = p.reaction_rate(0, x, t);
            assert!((k - s.k_react).abs() < 1e-12 * k);
            let rate = p.alpha * k * (1.0 - phi(x, t)) * c(x, t) / p.rho_s;
            assert!((d_dt(phi, x, t) - rate).abs() < 1e-8);
            // Permeability from the correlation.
            let phi0 = p.phi0.eval(0, x, 0.0);
            let kap = permeability(s.phi, phi0, 1.0).unwrap();
            assert!((kap - s.kappa).abs() < 1e-10 * kap);
            // Pressure equation.
            let f = cs.f_inj.eval(0, x, t) + cs.f_prod.eval(0, x, t);
            let lhs = div(&*cs.velocity, x, t) + rate;
            assert!((lhs - f).abs() < 1e-6 * (1.0 + f.abs()));
            // Transport equation.
            let phic = |y: Point, r: f64| phi(y, r) * c(y, r);
            let uc = |y: Point, r: f64| {
                let u = (cs.velocity)(y, r);
                [u[0] * c(y, r), u[1] * c(y, r)]
            };
            let lhs = d_dt(&phic, x, t)
                + div(&uc, x, t)
                + div(&*cs.flux, x, t)
                + k * (1.0 - phi(x, t)) * c(x, t);
            let rhs = cs.f_prod.eval(0, x, t) * c(x, t) + p.c_inj.eval(0, x, t);
            assert!((lhs - rhs).abs() < 1e-6 * (1.0 + rhs.abs()));
            // Initial porosity.
            assert!((phi(x, 0.0) - phi0).abs() < 1e-14);
        }
    }
}
