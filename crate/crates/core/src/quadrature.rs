//! Gauss rules on `[0, 1]` and collapsed (Duffy) product rules on the
//! reference triangle `(0,0), (1,0), (0,1)`.

use alloc::vec::Vec;

use crate::{Error, Point, Result};

/// Highest exactness degree the rule generator accepts.
pub const MAX_DEGREE: usize = 40;

/// Quadrature on the reference triangle (area 1/2).
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Polynomials of total degree up to this value are integrated exactly.
    pub degree: usize,
}

/// Quadrature on the unit interval, used for edges parametrized by `s`.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n`-point Gauss-Legendre nodes and weights on `[0, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev-like initial guess for the i-th largest root on [-1, 1].
        let mut z = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        x.push(0.5 * (1.0 - z));
        w.push(1.0 / ((1.0 - z * z) * dp * dp));
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let pj = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = pj;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss rule on `[0, 1]` exact for polynomials of degree `degree`.
pub fn edge_rule(degree: usize) -> Result<EdgeRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadrature(degree));
    }
    let n = degree / 2 + 1;
    let (points, weights) = gauss_legendre(n);
    Ok(EdgeRule {
        points,
        weights,
        degree,
    })
}

/// Collapsed Gauss product rule on the reference triangle exact for total
/// degree `degree`. All weights are positive and all points interior.
pub fn triangle_rule(degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadrature(degree));
    }
    // x = u, y = v (1 - u), dx dy = (1 - u) du dv: degree + 1 in u, degree in v.
    let nu = degree.div_ceil(2) + 1;
    let nv = degree / 2 + 1;
    let (u, wu) = gauss_legendre(nu);
    let (v, wv) = gauss_legendre(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (ui, wui) in u.iter().zip(&wu) {
        for (vj, wvj) in v.iter().zip(&wv) {
            points.push([*ui, vj * (1.0 - ui)]);
            weights.push(wui * wvj * (1.0 - ui));
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        degree,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    /// Exact integral of x^a y^b over the reference triangle.
    fn monomial_integral(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn reference_area() {
        let r = triangle_rule(1).unwrap();
        let s: f64 = r.weights.iter().sum();
        assert!((s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn x2y_integral() {
        let r = triangle_rule(3).unwrap();
        let s: f64 = r
            .points
            .iter()
            .zip(&r.weights)
            .map(|(p, w)| w * p[0] * p[0] * p[1])
            .sum();
        assert!((s - 1.0 / 60.0).abs() < 1e-16);
    }

    #[test]
    fn triangle_exactness_sweep() {
        for deg in 0..=20usize {
            let r = triangle_rule(deg).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            assert!(r
                .points
                .iter()
                .all(|p| p[0] > 0.0 && p[1] > 0.0 && p[0] + p[1] < 1.0));
            for a in 0..=deg as u32 {
                for b in 0..=(deg as u32 - a) {
                    let s: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * libm::pow(p[0], a as f64) * libm::pow(p[1], b as f64))
                        .sum();
                    let exact = monomial_integral(a, b);
                    assert!(
                        (s - exact).abs() <= 1e-13 * exact,
                        "deg {deg} monomial ({a},{b}): {s} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn edge_exactness_sweep() {
        for m in 1..=12usize {
            let (x, w) = gauss_legendre(m);
            let total: f64 = w.iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
            for p in 0..(2 * m) {
                let s: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(x, w)| w * libm::pow(*x, p as f64))
                    .sum();
                let exact = 1.0 / (p as f64 + 1.0);
                assert!((s - exact).abs() <= 1e-13 * exact, "m={m} p={p}");
            }
        }
        let r = edge_rule(6).unwrap();
        assert_eq!(r.len(), 4);
    }

    #[test]
    fn unsupported_degree() {
        assert!(triangle_rule(MAX_DEGREE + 1).is_err());
        assert!(edge_rule(MAX_DEGREE + 1).is_err());
    }
}
