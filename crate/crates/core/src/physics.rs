//! Model coefficients: permeability law, interfacial area, lumped reaction
//! rate, dispersion tensor and the concentration cut-off.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Point, Result};

pub type Tensor = [[f64; 2]; 2];

/// Below this speed the dispersion tensor is taken as `dm I`.
pub const ZERO_VELOCITY: f64 = 1e-12;

/// Scalar coefficient evaluated by element index, point and time.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    /// One value per mesh element.
    PerElement(Arc<[f64]>),
    Function(Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>),
}

impl Coefficient {
    pub fn function(f: impl Fn(Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        Coefficient::Function(Arc::new(f))
    }

    pub fn per_element(values: Vec<f64>) -> Self {
        Coefficient::PerElement(values.into())
    }

    #[inline]
    pub fn eval(&self, element: usize, x: Point, t: f64) -> f64 {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::PerElement(v) => v[element],
            Coefficient::Function(f) => f(x, t),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coefficient::Constant(v) => *v == 0.0,
            Coefficient::PerElement(v) => v.iter().all(|&x| x == 0.0),
            Coefficient::Function(_) => false,
        }
    }

    /// Range of the stored values; `None` for closed-form coefficients.
    pub fn known_range(&self) -> Option<(f64, f64)> {
        match self {
            Coefficient::Constant(v) => Some((*v, *v)),
            Coefficient::PerElement(v) => Some(
                v.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                        (a.min(x), b.max(x))
                    }),
            ),
            Coefficient::Function(_) => None,
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(v) => write!(f, "Constant({v})"),
            Coefficient::PerElement(v) => write!(f, "PerElement(len={})", v.len()),
            Coefficient::Function(_) => f.write_str("Function"),
        }
    }
}

impl From<f64> for Coefficient {
    fn from(v: f64) -> Self {
        Coefficient::Constant(v)
    }
}

#[derive(Clone, Debug)]
pub struct ModelParams {
    /// Viscosity.
    pub mu: f64,
    /// Solid density.
    pub rho_s: f64,
    /// Dissolving power.
    pub alpha: f64,
    /// Initial interfacial area.
    pub a0: f64,
    pub kappa0: Coefficient,
    pub phi0: Coefficient,
    /// Mass-transfer coefficient.
    pub kappa_c: f64,
    /// Surface reaction rate.
    pub kappa_s: f64,
    pub dm: f64,
    pub dl: f64,
    pub dt: f64,
    /// Injected concentration.
    pub c_inj: Coefficient,
    /// Replaces the lumped rate derived from `a0`, `phi0`, `kappa_c`, `kappa_s`.
    pub reaction_override: Option<Coefficient>,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu", self.mu),
            ("rho_s", self.rho_s),
            ("alpha", self.alpha),
            ("a0", self.a0),
            ("kappa_c", self.kappa_c),
            ("kappa_s", self.kappa_s),
            ("dm", self.dm),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        for (name, value) in [("dl", self.dl), ("dt", self.dt)] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        if let Some((lo, hi)) = self.phi0.known_range() {
            if !(lo > 0.0 && hi < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "phi0",
                    value: if lo > 0.0 { hi } else { lo },
                });
            }
        }
        if let Some((lo, _)) = self.kappa0.known_range() {
            if !(lo > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "kappa0",
                    value: lo,
                });
            }
        }
        Ok(())
    }

    /// `kappa_c kappa_s / (kappa_c + kappa_s)`.
    pub fn transfer_factor(&self) -> f64 {
        self.kappa_c * self.kappa_s / (self.kappa_c + self.kappa_s)
    }

    /// Lumped reaction rate `K` at a point.
    #[inline]
    pub fn reaction_rate(&self, element: usize, x: Point, t: f64) -> f64 {
        match &self.reaction_override {
            Some(k) => k.eval(element, x, t),
            None => reaction_rate(
                self.a0,
                self.phi0.eval(element, x, t),
                self.transfer_factor(),
            ),
        }
    }

    /// `alpha K / rho_s`.
    #[inline]
    pub fn dissolution_rate(&self, element: usize, x: Point, t: f64) -> f64 {
        self.alpha * self.reaction_rate(element, x, t) / self.rho_s
    }

    pub fn permeability_at(&self, phi: f64, element: usize, x: Point) -> Result<f64> {
        permeability(
            phi,
            self.phi0.eval(element, x, 0.0),
            self.kappa0.eval(element, x, 0.0),
        )
    }

    /// `beta(phi) = mu / kappa(phi)`.
    pub fn beta_at(&self, phi: f64, element: usize, x: Point) -> Result<f64> {
        Ok(self.mu / self.permeability_at(phi, element, x)?)
    }

    pub fn diffusion(&self, u: Point) -> Tensor {
        diffusion_tensor(u, self.dm, self.dl, self.dt)
    }

    pub fn inv_phi_d(&self, phi: f64, u: Point) -> Result<Tensor> {
        inv_phi_d(phi, u, self.dm, self.dl, self.dt)
    }
}

/// `a0 / (1 - phi0) * transfer`.
pub fn reaction_rate(a0: f64, phi0: f64, transfer: f64) -> f64 {
    a0 / (1.0 - phi0) * transfer
}

/// Clamps to `[0, 1]`.
#[inline]
pub fn cutoff(c: f64) -> f64 {
    c.clamp(0.0, 1.0)
}

fn check_porosity(what: &'static str, phi: f64) -> Result<()> {
    if phi > 0.0 && phi < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { what, value: phi })
    }
}

/// Carman-Kozeny: `kappa0 (phi/phi0) (phi (1-phi0) / (phi0 (1-phi)))^2`.
pub fn permeability(phi: f64, phi0: f64, kappa0: f64) -> Result<f64> {
    check_porosity("porosity", phi)?;
    check_porosity("initial porosity", phi0)?;
    let r = phi * (1.0 - phi0) / (phi0 * (1.0 - phi));
    Ok(kappa0 * (phi / phi0) * r * r)
}

/// `a0 (1 - phi) / (1 - phi0)`.
pub fn interfacial_area(phi: f64, phi0: f64, a0: f64) -> Result<f64> {
    if !(phi > 0.0 && phi <= 1.0) {
        return Err(Error::Domain {
            what: "porosity",
            value: phi,
        });
    }
    check_porosity("initial porosity", phi0)?;
    Ok(a0 * (1.0 - phi) / (1.0 - phi0))
}

/// `c_f / (1 + kappa_s / kappa_c)`.
pub fn surface_concentration(c_f: f64, kappa_c: f64, kappa_s: f64) -> f64 {
    c_f / (1.0 + kappa_s / kappa_c)
}

/// `dm I + |u| (dl E + dt E_perp)` with `E = u u^T / |u|^2`.
pub fn diffusion_tensor(u: Point, dm: f64, dl: f64, dt: f64) -> Tensor {
    let speed = libm::hypot(u[0], u[1]);
    if speed < ZERO_VELOCITY {
        return [[dm, 0.0], [0.0, dm]];
    }
    let e = [
        [u[0] * u[0] / (speed * speed), u[0] * u[1] / (speed * speed)],
        [u[1] * u[0] / (speed * speed), u[1] * u[1] / (speed * speed)],
    ];
    let mut d = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            d[i][j] = dm * id + speed * (dl * e[i][j] + dt * (id - e[i][j]));
        }
    }
    d
}

/// `(phi D(u))^{-1}`.
pub fn inv_phi_d(phi: f64, u: Point, dm: f64, dl: f64, dt: f64) -> Result<Tensor> {
    if !(phi > 0.0) {
        return Err(Error::Domain {
            what: "porosity",
            value: phi,
        });
    }
    let d = diffusion_tensor(u, dm, dl, dt);
    let det = phi * phi * (d[0][0] * d[1][1] - d[0][1] * d[1][0]);
    if !(det > 0.0) {
        return Err(Error::Domain {
            what: "diffusion determinant",
            value: det,
        });
    }
    Ok([
        [phi * d[1][1] / det, -phi * d[0][1] / det],
        [-phi * d[1][0] / det, phi * d[0][0] / det],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat_mul(a: Tensor, b: Tensor) -> Tensor {
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        c
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff(-0.3), 0.0);
        assert_eq!(cutoff(0.5), 0.5);
        assert_eq!(cutoff(1.7), 1.0);
    }

    #[test]
    fn permeability_examples() {
        assert_eq!(permeability(0.3, 0.3, 2e-9).unwrap(), 2e-9);
        assert!((permeability(0.75, 0.5, 1.0).unwrap() - 13.5).abs() < 1e-12);
        assert!(permeability(0.4, 0.3, 1.0).unwrap() < permeability(0.6, 0.3, 1.0).unwrap());
        assert!(permeability(1.0, 0.3, 1.0).is_err());
        assert!(permeability(0.0, 0.3, 1.0).is_err());
    }

    #[test]
    fn interfacial_area_examples() {
        assert_eq!(interfacial_area(0.3, 0.3, 2.0).unwrap(), 2.0);
        assert_eq!(interfacial_area(1.0, 0.3, 2.0).unwrap(), 0.0);
        assert!((interfacial_area(0.65, 0.3, 2.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn surface_concentration_examples() {
        assert_eq!(surface_concentration(0.0, 1.0, 10.0), 0.0);
        assert_eq!(surface_concentration(0.8, 2.0, 2.0), 0.4);
        assert!((surface_concentration(1.0, 1.0, 10.0) - 1.0 / 11.0).abs() < 1e-16);
    }

    #[test]
    fn diffusion_examples() {
        assert_eq!(
            diffusion_tensor([0.0, 0.0], 0.3, 1.0, 2.0),
            [[0.3, 0.0], [0.0, 0.3]]
        );
        assert_eq!(
            diffusion_tensor([1.0, 0.0], 0.0, 2.0, 1.0),
            [[2.0, 0.0], [0.0, 1.0]]
        );
        let inv = inv_phi_d(1.0, [0.0, 0.0], 0.25, 0.0, 0.0).unwrap();
        assert_eq!(inv, [[4.0, 0.0], [0.0, 4.0]]);
        let a = inv_phi_d(1.0, [0.3, 0.1], 0.2, 0.5, 0.1).unwrap();
        let b = inv_phi_d(0.5, [0.3, 0.1], 0.2, 0.5, 0.1).unwrap();
        assert!((b[0][1] - 2.0 * a[0][1]).abs() < 1e-14);
        assert!(inv_phi_d(0.0, [0.0, 0.0], 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn lumped_rate_formula() {
        let p = ModelParams {
            mu: 0.01,
            rho_s: 2500.0,
            alpha: 100.0,
            a0: 2.0,
            kappa0: 1e-9.into(),
            phi0: 0.3.into(),
            kappa_c: 1.0,
            kappa_s: 10.0,
            dm: 1e-5,
            dl: 0.0,
            dt: 0.0,
            c_inj: 1.0.into(),
            reaction_override: None,
        };
        p.validate().unwrap();
        let k = p.reaction_rate(0, [0.0, 0.0], 0.0);
        let expected = 2.0 / 0.7 * (10.0 / 11.0);
        assert!((k - expected).abs() <= 1e-14 * expected);
        let mut bad = p.clone();
        bad.phi0 = 1.0.into();
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn dispersion_eigenstructure(ux in -5.0f64..5.0, uy in -5.0f64..5.0, dm in 1e-6f64..1.0, dl in 0.0f64..2.0, dt in 0.0f64..2.0) {
            prop_assume!(libm::hypot(ux, uy) > 1e-6);
            let d = diffusion_tensor([ux, uy], dm, dl, dt);
            let s = libm::hypot(ux, uy);
            prop_assert!((d[0][1] - d[1][0]).abs() < 1e-14);
            let du = [d[0][0] * ux + d[0][1] * uy, d[1][0] * ux + d[1][1] * uy];
            let lam = dm + dl * s;
            prop_assert!((du[0] - lam * ux).abs() <= 1e-12 * lam * s);
            prop_assert!((du[1] - lam * uy).abs() <= 1e-12 * lam * s);
            let w = [-uy, ux];
            let dw = [d[0][0] * w[0] + d[0][1] * w[1], d[1][0] * w[0] + d[1][1] * w[1]];
            let mu = dm + dt * s;
            prop_assert!((dw[0] - mu * w[0]).abs() <= 1e-12 * mu * s);
            // Continuity at zero.
            let off = (d[0][0] - dm).abs().max(d[0][1].abs()).max((d[1][1] - dm).abs());
            prop_assert!(off <= (dl + dt) * s + 1e-14);
        }

        #[test]
        fn inverse_times_phi_d_is_identity(phi in 0.01f64..1.0, ux in -3.0f64..3.0, uy in -3.0f64..3.0, dm in 1e-3f64..1.0, dl in 0.0f64..1.0, dt in 0.0f64..1.0) {
            let inv = inv_phi_d(phi, [ux, uy], dm, dl, dt).unwrap();
            let d = diffusion_tensor([ux, uy], dm, dl, dt);
            let pd = [[phi * d[0][0], phi * d[0][1]], [phi * d[1][0], phi * d[1][1]]];
            let id = mat_mul(inv, pd);
            prop_assert!((id[0][0] - 1.0).abs() < 1e-12 && (id[1][1] - 1.0).abs() < 1e-12);
            prop_assert!(id[0][1].abs() < 1e-12 && id[1][0].abs() < 1e-12);
        }

        #[test]
        fn dispersion_lipschitz(a in proptest::array::uniform2(-2.0f64..2.0), b in proptest::array::uniform2(-2.0f64..2.0)) {
            let (dm, dl, dt) = (0.1, 0.7, 0.3);
            let da = diffusion_tensor(a, dm, dl, dt);
            let db = diffusion_tensor(b, dm, dl, dt);
            let mut diff: f64 = 0.0;
            for i in 0..2 { for j in 0..2 { diff = diff.max((da[i][j] - db[i][j]).abs()); } }
            let dist = libm::hypot(a[0] - b[0], a[1] - b[1]);
            // Each entry is Lipschitz with constant at most 3 max(dl, dt).
            prop_assert!(diff <= 3.0 * 0.7 * dist + 1e-12);
        }

        #[test]
        fn permeability_ratio_bounded_away_from_limits(phi in 0.05f64..0.95) {
            let k = permeability(phi, 0.3, 1.0).unwrap();
            let lo = permeability(0.05, 0.3, 1.0).unwrap();
            let hi = permeability(0.95, 0.3, 1.0).unwrap();
            prop_assert!(k >= lo * (1.0 - 1e-12) && k <= hi * (1.0 + 1e-12));
        }
    }
}
