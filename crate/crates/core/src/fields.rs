//! Discrete field containers, projections and error norms.
//!
//! Scalar fields use the Lagrange basis, so coefficients are nodal values.
//! Trace coefficients are Legendre moments in the edge's global orientation.

use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{dim_p, dim_rt, legendre, DofFunctionals, ReferenceElement};
use crate::linalg::{DenseLu, DenseMatrix};
use crate::mesh::ElementGeometry;
use crate::quadrature::edge_rule;
use crate::{check_degree, Error, Mesh, Point, Result};

/// Quadrature exactness used by projections and interpolation.
pub const PROJECTION_DEGREE: usize = 14;

/// Quadrature exactness for errors against exact solutions of degree `k`
/// runs: two above the assembly rule.
pub const fn error_degree(k: usize) -> usize {
    2 * k + 4
}

macro_rules! blocked_field {
    ($name:ident, $dim:expr, $count:ident) => {
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            degree: usize,
            coeffs: Vec<f64>,
        }

        impl $name {
            pub fn zeros(mesh: &Mesh, k: usize) -> Self {
                $name {
                    degree: k,
                    coeffs: vec![0.0; mesh.$count() * $dim(k)],
                }
            }

            pub fn from_coeffs(mesh: &Mesh, k: usize, coeffs: Vec<f64>) -> Result<Self> {
                check_degree(k)?;
                let expected = mesh.$count() * $dim(k);
                if coeffs.len() != expected {
                    return Err(Error::Mismatch {
                        what: stringify!($name),
                        expected,
                        found: coeffs.len(),
                    });
                }
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::NonFinite {
                        what: stringify!($name),
                    });
                }
                Ok($name { degree: k, coeffs })
            }

            pub fn degree(&self) -> usize {
                self.degree
            }

            pub fn block_size(&self) -> usize {
                $dim(self.degree)
            }

            pub fn n_blocks(&self) -> usize {
                self.coeffs.len() / self.block_size()
            }

            pub fn block(&self, i: usize) -> &[f64] {
                let b = self.block_size();
                &self.coeffs[i * b..(i + 1) * b]
            }

            pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
                let b = self.block_size();
                &mut self.coeffs[i * b..(i + 1) * b]
            }

            pub fn coeffs(&self) -> &[f64] {
                &self.coeffs
            }

            pub fn coeffs_mut(&mut self) -> &mut [f64] {
                &mut self.coeffs
            }

            pub fn is_finite(&self) -> bool {
                self.coeffs.iter().all(|c| c.is_finite())
            }

            /// Errors unless the field has one block per mesh entity.
            pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
                if self.n_blocks() != mesh.$count() {
                    return Err(Error::Mismatch {
                        what: concat!(stringify!($name), " blocks"),
                        expected: mesh.$count(),
                        found: self.n_blocks(),
                    });
                }
                Ok(())
            }

            /// Coefficient-wise difference.
            pub fn sub(&self, other: &Self) -> Result<Self> {
                if self.degree != other.degree || self.coeffs.len() != other.coeffs.len() {
                    return Err(Error::Mismatch {
                        what: stringify!($name),
                        expected: self.coeffs.len(),
                        found: other.coeffs.len(),
                    });
                }
                Ok($name {
                    degree: self.degree,
                    coeffs: self
                        .coeffs
                        .iter()
                        .zip(&other.coeffs)
                        .map(|(a, b)| a - b)
                        .collect(),
                })
            }
        }
    };
}

const fn dim_trace(k: usize) -> usize {
    k + 1
}

blocked_field!(DgField, dim_p, n_elements);
blocked_field!(RtField, dim_rt, n_elements);
blocked_field!(TraceField, dim_trace, n_edges);

impl DgField {
    pub fn constant(mesh: &Mesh, k: usize, v: f64) -> Self {
        DgField {
            degree: k,
            coeffs: vec![v; mesh.n_elements() * dim_p(k)],
        }
    }

    /// Values at the rows of `table` (basis values per point) in element `t`.
    pub fn values_at(&self, t: usize, table: &[Vec<f64>]) -> Vec<f64> {
        let c = self.block(t);
        table.iter().map(|row| dot(row, c)).collect()
    }

    pub fn value(&self, re: &ReferenceElement, t: usize, xi: Point) -> f64 {
        dot(&re.scalar.values(xi), self.block(t))
    }

    /// Mean over element `t` (the Lagrange basis integrates to a
    /// degree-dependent weight per node).
    pub fn element_mean(&self, re: &ReferenceElement, t: usize) -> f64 {
        let vals = self.values_at(t, &re.phi);
        2.0 * vals
            .iter()
            .zip(&re.vol.weights)
            .map(|(v, w)| v * w)
            .sum::<f64>()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.coeffs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

impl RtField {
    /// Physical vector values at reference tabulation `table` in element `t`.
    pub fn values_at(&self, geom: &ElementGeometry, t: usize, table: &[Vec<Point>]) -> Vec<Point> {
        let c = self.block(t);
        table
            .iter()
            .map(|row| {
                let mut v = [0.0; 2];
                for (psi, ci) in row.iter().zip(c) {
                    v[0] += ci * psi[0];
                    v[1] += ci * psi[1];
                }
                geom.piola(v)
            })
            .collect()
    }

    pub fn value(
        &self,
        re: &ReferenceElement,
        geom: &ElementGeometry,
        t: usize,
        xi: Point,
    ) -> Point {
        self.values_at(geom, t, &[re.rt.values(xi)])[0]
    }

    /// Moments of `u . n_local` on local edge `i` of element `t` against the
    /// local-orientation Legendre basis; these are the edge coefficients.
    pub fn edge_moments(&self, t: usize, i: usize) -> &[f64] {
        let k1 = self.degree + 1;
        &self.block(t)[i * k1..(i + 1) * k1]
    }
}

impl TraceField {
    /// Coefficients seen from element side with orientation `sign`
    /// (local-parameter Legendre coefficients).
    pub fn local_block(&self, e: usize, sign: f64) -> Vec<f64> {
        self.block(e)
            .iter()
            .enumerate()
            .map(|(j, &c)| if sign < 0.0 && j % 2 == 1 { -c } else { c })
            .collect()
    }

    pub fn value(&self, e: usize, s_global: f64) -> f64 {
        self.block(e)
            .iter()
            .enumerate()
            .map(|(j, c)| c * legendre(j, s_global))
            .sum()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Element-wise `L^2` projection onto `P_k`.
pub fn l2_project_element(f: &dyn Fn(Point) -> f64, mesh: &Mesh, k: usize) -> Result<DgField> {
    let re = ReferenceElement::new(k, PROJECTION_DEGREE)?;
    let n = re.n_scalar();
    let mass = DenseMatrix::from_fn(n, n, |i, j| {
        re.phi
            .iter()
            .zip(&re.vol.weights)
            .map(|(p, w)| w * p[i] * p[j])
            .sum()
    });
    let lu = DenseLu::factor(&mass)?;
    let mut out = DgField::zeros(mesh, k);
    for t in 0..mesh.n_elements() {
        let g = mesh.geometry(t);
        let mut rhs = vec![0.0; n];
        for ((x, w), p) in re.vol.points.iter().zip(&re.vol.weights).zip(&re.phi) {
            let v = f(g.map(*x));
            for i in 0..n {
                rhs[i] += w * v * p[i];
            }
        }
        lu.solve_in_place(&mut rhs);
        out.block_mut(t).copy_from_slice(&rhs);
    }
    Ok(out)
}

/// Edge-wise `L^2` projection onto `P_k(e)` in global orientation.
pub fn l2_project_edge(f: &dyn Fn(Point) -> f64, mesh: &Mesh, k: usize) -> Result<TraceField> {
    check_degree(k)?;
    let rule = edge_rule(PROJECTION_DEGREE)?;
    let mut out = TraceField::zeros(mesh, k);
    for e in 0..mesh.n_edges() {
        let block = out.block_mut(e);
        for (&s, w) in rule.points.iter().zip(&rule.weights) {
            let v = f(mesh.edge_point(e, s));
            for (j, b) in block.iter_mut().enumerate() {
                *b += w * v * legendre(j, s);
            }
        }
    }
    Ok(out)
}

/// Raviart-Thomas interpolant: matches edge normal moments against
/// `P_k(e)` and interior moments against `[P_{k-1}]^2`.
pub fn rt_interpolate(w: &dyn Fn(Point) -> Point, mesh: &Mesh, k: usize) -> Result<RtField> {
    check_degree(k)?;
    let dofs = DofFunctionals::with_degree(k, PROJECTION_DEGREE)?;
    let mut out = RtField::zeros(mesh, k);
    for t in 0..mesh.n_elements() {
        let g = mesh.geometry(t);
        let a = g.inv_jacobian;
        // Inverse Piola pull-back.
        let pulled = |xi: Point| {
            let v = w(g.map(xi));
            [
                g.det * (a[0][0] * v[0] + a[0][1] * v[1]),
                g.det * (a[1][0] * v[0] + a[1][1] * v[1]),
            ]
        };
        let block = out.block_mut(t);
        for (i, b) in block.iter_mut().enumerate() {
            *b = dofs.apply(i, &pulled);
        }
    }
    Ok(out)
}

/// `||f_h - f||` with `f_h` a DG field and `f` exact (pass `|_| 0.0` for the norm).
pub fn l2_error_dg(field: &DgField, mesh: &Mesh, exact: &dyn Fn(Point) -> f64) -> Result<f64> {
    field.check_mesh(mesh)?;
    let k = field.degree();
    let re = ReferenceElement::new(k, error_degree(k))?;
    let mut sum = 0.0;
    for t in 0..mesh.n_elements() {
        let g = mesh.geometry(t);
        let vals = field.values_at(t, &re.phi);
        for ((x, w), v) in re.vol.points.iter().zip(&re.vol.weights).zip(vals) {
            let d = v - exact(g.map(*x));
            sum += w * g.det * d * d;
        }
    }
    Ok(libm::sqrt(sum))
}

pub fn l2_error_rt(field: &RtField, mesh: &Mesh, exact: &dyn Fn(Point) -> Point) -> Result<f64> {
    field.check_mesh(mesh)?;
    let k = field.degree();
    let re = ReferenceElement::new(k, error_degree(k))?;
    let mut sum = 0.0;
    for t in 0..mesh.n_elements() {
        let g = mesh.geometry(t);
        let vals = field.values_at(&g, t, &re.psi);
        for ((x, w), v) in re.vol.points.iter().zip(&re.vol.weights).zip(vals) {
            let e = exact(g.map(*x));
            let (dx, dy) = (v[0] - e[0], v[1] - e[1]);
            sum += w * g.det * (dx * dx + dy * dy);
        }
    }
    Ok(libm::sqrt(sum))
}

pub fn l2_norm_dg(field: &DgField, mesh: &Mesh) -> Result<f64> {
    l2_error_dg(field, mesh, &|_| 0.0)
}

pub fn l2_norm_rt(field: &RtField, mesh: &Mesh) -> Result<f64> {
    l2_error_rt(field, mesh, &|_| [0.0, 0.0])
}

/// `(sum_K sum_{e in dK} h_e^p ||lambda||_e^2)^(1/2)`; interior edges count twice.
pub fn edge_seminorm(trace: &TraceField, mesh: &Mesh, h_power: i32) -> Result<f64> {
    trace.check_mesh(mesh)?;
    let mut sum = 0.0;
    for (e, edge) in mesh.edges().iter().enumerate() {
        let sides = if edge.is_boundary() { 1.0 } else { 2.0 };
        let sq: f64 = trace.block(e).iter().map(|c| c * c).sum();
        sum += sides * libm::pow(edge.length, h_power as f64) * edge.length * sq;
    }
    Ok(libm::sqrt(sum))
}

/// `log(e1/e2) / log(h1/h2)`.
pub fn observed_order(e1: f64, e2: f64, h1: f64, h2: f64) -> Result<f64> {
    if !(e1 > 0.0) || !(e2 > 0.0) {
        return Err(Error::Domain {
            what: "error for observed order",
            value: if e1 > 0.0 { e2 } else { e1 },
        });
    }
    if h1 == h2 || !(h1 > 0.0) || !(h2 > 0.0) {
        return Err(Error::Domain {
            what: "mesh size pair for observed order",
            value: h2,
        });
    }
    Ok(libm::log(e1 / e2) / libm::log(h1 / h2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rect;
    use core::f64::consts::PI;

    fn sinsin(x: Point) -> f64 {
        libm::sin(PI * x[0]) * libm::sin(PI * x[1])
    }

    #[test]
    fn norms_of_simple_functions() {
        let m = Mesh::build_uniform(8, 8, Rect::UNIT).unwrap();
        let zero = DgField::zeros(&m, 1);
        assert_eq!(l2_norm_dg(&zero, &m).unwrap(), 0.0);
        let one = DgField::constant(&m, 2, 1.0);
        assert!((l2_norm_dg(&one, &m).unwrap() - 1.0).abs() < 1e-13);
        // ||sin sin|| = 1/2, measured from a zero field.
        let z = DgField::zeros(&m, 2);
        let n = l2_error_dg(&z, &m, &sinsin).unwrap();
        assert!((n - 0.5).abs() < 1e-4);
    }

    #[test]
    fn projection_reproduces_constants_and_residual_moments_vanish() {
        let m = Mesh::build_uniform(3, 3, Rect::UNIT).unwrap();
        for k in 0..=2 {
            let p = l2_project_element(&|_| 2.5, &m, k).unwrap();
            assert!(p.coeffs().iter().all(|c| (c - 2.5).abs() < 1e-13));
            let f = |x: Point| libm::exp(x[0]) * libm::cos(3.0 * x[1]);
            let p = l2_project_element(&f, &m, k).unwrap();
            let re = ReferenceElement::new(k, PROJECTION_DEGREE).unwrap();
            for t in 0..m.n_elements() {
                let g = m.geometry(t);
                let vals = p.values_at(t, &re.phi);
                for i in 0..re.n_scalar() {
                    let r: f64 = re
                        .vol
                        .points
                        .iter()
                        .zip(&re.vol.weights)
                        .enumerate()
                        .map(|(q, (x, w))| w * g.det * (f(g.map(*x)) - vals[q]) * re.phi[q][i])
                        .sum();
                    assert!(r.abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let m = Mesh::build_uniform(4, 4, Rect::UNIT).unwrap();
        let k = 2;
        let p = l2_project_element(&sinsin, &m, k).unwrap();
        let re = ReferenceElement::new(k, 4).unwrap();
        let eval = |x: Point| {
            let t = m.elements_containing(x)[0];
            p.value(&re, t, m.geometry(t).inverse_map(x))
        };
        // Evaluate through the owning element: sample points are interior
        // quadrature points, so the containing element is unique.
        let q = l2_project_element(&eval, &m, k).unwrap();
        for (a, b) in p.coeffs().iter().zip(q.coeffs()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn projection_order_k_plus_one() {
        for k in 0..=2 {
            let errs: Vec<f64> = [10, 20]
                .iter()
                .map(|&n| {
                    let m = Mesh::build_uniform(n, n, Rect::UNIT).unwrap();
                    let p = l2_project_element(&sinsin, &m, k).unwrap();
                    l2_error_dg(&p, &m, &sinsin).unwrap()
                })
                .collect();
            let r = observed_order(errs[0], errs[1], 0.1, 0.05).unwrap();
            assert!(r > k as f64 + 0.9, "k={k} rate={r}");
        }
    }

    #[test]
    fn edge_projection() {
        let m = Mesh::build_uniform(2, 3, Rect::UNIT).unwrap();
        let lin = |x: Point| 1.0 + 2.0 * x[0] - x[1];
        let p = l2_project_edge(&lin, &m, 1).unwrap();
        for e in 0..m.n_edges() {
            for s in [0.0, 0.3, 1.0] {
                assert!((p.value(e, s) - lin(m.edge_point(e, s))).abs() < 1e-13);
            }
        }
        let c = l2_project_edge(&|_| 3.0, &m, 0).unwrap();
        assert!(c.coeffs().iter().all(|v| (v - 3.0).abs() < 1e-14));
    }

    #[test]
    fn local_block_reverses_orientation() {
        let m = Mesh::build_uniform(1, 1, Rect::UNIT).unwrap();
        let f = |x: Point| x[0] * x[0] + x[1];
        let p = l2_project_edge(&f, &m, 2).unwrap();
        for e in 0..m.n_edges() {
            let loc = p.local_block(e, -1.0);
            for s in [0.1, 0.6] {
                let v: f64 = loc
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * legendre(j, s))
                    .sum();
                assert!((v - p.value(e, 1.0 - s)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rt_interpolant_reproduces_constants() {
        let m = Mesh::build_uniform(3, 2, Rect::UNIT).unwrap();
        let u = rt_interpolate(&|_| [0.7, -1.3], &m, 0).unwrap();
        let re = ReferenceElement::new(0, 2).unwrap();
        for t in 0..m.n_elements() {
            let v = u.value(&re, &m.geometry(t), t, [0.2, 0.3]);
            assert!((v[0] - 0.7).abs() < 1e-13 && (v[1] + 1.3).abs() < 1e-13);
        }
    }

    #[test]
    fn observed_order_examples() {
        let r = observed_order(4.6542e-02, 2.2510e-02, 0.1, 0.05).unwrap();
        assert!((r - 1.0480).abs() < 5e-5);
        assert_eq!(observed_order(0.3, 0.3, 0.1, 0.05).unwrap(), 0.0);
        assert!((observed_order(8.0, 1.0, 0.2, 0.1).unwrap() - 3.0).abs() < 1e-14);
        assert!(observed_order(0.0, 1.0, 0.2, 0.1).is_err());
        assert!(observed_order(1.0, 1.0, 0.1, 0.1).is_err());
    }
}
