//! Porosity update: backward Euler in `phi`, explicit in the clamped
//! concentration, solved in closed form at Lagrange nodes.

use crate::basis::ScalarBasis;
use crate::fields::DgField;
use crate::physics::{cutoff, ModelParams};
use crate::{Error, Mesh, Result};

/// `(phi_prev + theta) / (1 + theta)` with `theta = dt * rate * c_bar`,
/// where `rate = alpha K / rho_s`. Never falls below `phi_prev` nor
/// reaches 1 from below.
pub fn porosity_step(phi_prev: f64, c_bar: f64, dt: f64, rate: f64) -> Result<f64> {
    if !(phi_prev > 0.0 && phi_prev < 1.0) {
        return Err(Error::Domain {
            what: "porosity",
            value: phi_prev,
        });
    }
    if !(0.0..=1.0).contains(&c_bar) {
        return Err(Error::Domain {
            what: "clamped concentration",
            value: c_bar,
        });
    }
    if !(dt > 0.0) {
        return Err(Error::Domain {
            what: "time step",
            value: dt,
        });
    }
    if !(rate >= 0.0) {
        return Err(Error::Domain {
            what: "dissolution rate",
            value: rate,
        });
    }
    let theta = dt * rate * c_bar;
    let phi = phi_prev + (1.0 - phi_prev) * (theta / (1.0 + theta));
    // The exact value is below 1 but may round up to it.
    Ok(if phi >= 1.0 { BELOW_ONE } else { phi })
}

/// Largest double below 1.
pub const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Residual of `(1 + theta) phi = phi_prev + theta` divided by `1 + theta`:
/// the update equation scaled so its conditioning does not grow with `theta`.
pub fn porosity_residual(phi: f64, phi_prev: f64, c_bar: f64, dt: f64, rate: f64) -> f64 {
    let theta = dt * rate * c_bar;
    ((1.0 + theta) * phi - (phi_prev + theta)) / (1.0 + theta)
}

/// Nodal update of a porosity field given last step's concentration.
/// Both fields share the Lagrange basis, so coefficients are nodal values.
pub fn porosity_field_step(
    phi_prev: &DgField,
    c_prev: &DgField,
    dt: f64,
    params: &ModelParams,
    mesh: &Mesh,
    t_prev: f64,
) -> Result<DgField> {
    phi_prev.check_mesh(mesh)?;
    c_prev.check_mesh(mesh)?;
    let k = phi_prev.degree();
    if c_prev.degree() != k {
        return Err(Error::Mismatch {
            what: "concentration degree",
            expected: k,
            found: c_prev.degree(),
        });
    }
    let basis = ScalarBasis::new(k)?;
    let mut out = phi_prev.clone();
    for t in 0..mesh.n_elements() {
        let g = mesh.geometry(t);
        let c = c_prev.block(t);
        for (i, phi) in out.block_mut(t).iter_mut().enumerate() {
            let x = g.map(basis.nodes()[i]);
            let rate = params.dissolution_rate(t, x, t_prev);
            *phi = porosity_step(*phi, cutoff(c[i]), dt, rate)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::Coefficient;
    use crate::Rect;
    use proptest::prelude::*;

    fn params(rate: f64) -> ModelParams {
        ModelParams {
            mu: 1.0,
            rho_s: 1.0,
            alpha: 1.0,
            a0: 1.0,
            kappa0: 1.0.into(),
            phi0: 0.3.into(),
            kappa_c: 1.0,
            kappa_s: 1.0,
            dm: 1.0,
            dl: 0.0,
            dt: 0.0,
            c_inj: 1.0.into(),
            reaction_override: Some(Coefficient::Constant(rate)),
        }
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(porosity_step(0.3, 0.0, 1.0, 5.0).unwrap(), 0.3);
        assert!((porosity_step(0.3, 1.0, 1.0, 1.0).unwrap() - 0.65).abs() < 1e-15);
        assert!(porosity_step(1.0, 0.5, 1.0, 1.0).is_err());
        assert!(porosity_step(0.5, 1.5, 1.0, 1.0).is_err());
        assert!(porosity_step(0.5, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn near_one_is_fixed() {
        let p = 1.0 - 1e-15;
        let v = porosity_step(p, 1.0, 1e6, 1.0).unwrap();
        assert!(v >= p && v < 1.0);
    }

    #[test]
    fn field_examples() {
        let m = Mesh::build_uniform(3, 3, Rect::UNIT).unwrap();
        for k in 0..=2 {
            let phi = DgField::constant(&m, k, 0.3);
            let zero = DgField::zeros(&m, k);
            assert_eq!(
                porosity_field_step(&phi, &zero, 0.1, &params(1.0), &m, 0.0).unwrap(),
                phi
            );
            let one = DgField::constant(&m, k, 1.0);
            let next = porosity_field_step(&phi, &one, 1.0, &params(1.0), &m, 0.0).unwrap();
            assert!(next.coeffs().iter().all(|v| (v - 0.65).abs() < 1e-15));
            let c = DgField::constant(&m, k, 3.0);
            let big = porosity_field_step(&phi, &c, 1e6, &params(1.0), &m, 0.0).unwrap();
            assert!(big.coeffs().iter().all(|&v| (0.3..1.0).contains(&v)));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn maximum_principle(phi in 1e-6f64..(1.0 - 1e-6), c in 0.0f64..=1.0, log_dt in -6.0f64..6.0, rate in 0.0f64..10.0) {
            let dt = libm::pow(10.0, log_dt);
            let next = porosity_step(phi, c, dt, rate).unwrap();
            prop_assert!(next >= phi && next < 1.0);
            prop_assert!(porosity_residual(next, phi, c, dt, rate).abs() <= 1e-13);
        }

        #[test]
        fn monotone_in_concentration(phi in 0.01f64..0.99, c1 in 0.0f64..1.0, c2 in 0.0f64..1.0, dt in 1e-3f64..10.0) {
            let (lo, hi) = if c1 < c2 { (c1, c2) } else { (c2, c1) };
            prop_assert!(porosity_step(phi, lo, dt, 1.0).unwrap() <= porosity_step(phi, hi, dt, 1.0).unwrap());
        }
    }
}
