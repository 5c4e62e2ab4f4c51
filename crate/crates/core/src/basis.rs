//! Reference-element shape functions: Lagrange `P_k`, Raviart-Thomas
//! `RT_k` (contravariant Piola) and orthonormal Legendre polynomials on
//! edges, plus tabulations at quadrature points.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{DenseLu, DenseMatrix};
use crate::quadrature::{edge_rule, triangle_rule, EdgeRule, QuadratureRule};
use crate::{check_degree, Point, Result};

/// Reference vertices; local edge `i` runs from vertex `i+1` to `i+2`.
pub const REF_VERTICES: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Number of monomials of total degree at most `d`.
pub const fn dim_p(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

pub const fn dim_rt(k: usize) -> usize {
    (k + 1) * (k + 3)
}

/// Exponents `(a, b)` of `x^a y^b`, ordered by total degree.
fn monomials(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim_p(d));
    for t in 0..=d {
        for b in 0..=t {
            out.push((t - b, b));
        }
    }
    out
}

fn powers(x: f64, d: usize) -> Vec<f64> {
    let mut p = vec![1.0; d + 1];
    for i in 1..=d {
        p[i] = p[i - 1] * x;
    }
    p
}

/// Polynomial in monomial coefficients up to degree `deg`.
#[derive(Clone, Debug)]
struct Poly {
    deg: usize,
    coef: Vec<f64>,
}

impl Poly {
    fn zero(deg: usize) -> Self {
        Poly {
            deg,
            coef: vec![0.0; dim_p(deg)],
        }
    }

    fn monomial(deg: usize, a: usize, b: usize) -> Self {
        let mut p = Self::zero(deg);
        let t = a + b;
        p.coef[dim_p(t) - (t + 1) + b] = 1.0;
        p
    }

    fn eval(&self, x: Point) -> f64 {
        let px = powers(x[0], self.deg);
        let py = powers(x[1], self.deg);
        monomials(self.deg)
            .iter()
            .zip(&self.coef)
            .map(|(&(a, b), c)| c * px[a] * py[b])
            .sum()
    }

    fn grad(&self, x: Point) -> Point {
        let px = powers(x[0], self.deg);
        let py = powers(x[1], self.deg);
        let mut g = [0.0; 2];
        for (&(a, b), c) in monomials(self.deg).iter().zip(&self.coef) {
            if a > 0 {
                g[0] += c * a as f64 * px[a - 1] * py[b];
            }
            if b > 0 {
                g[1] += c * b as f64 * px[a] * py[b - 1];
            }
        }
        g
    }

    fn axpy(&mut self, s: f64, other: &Poly) {
        debug_assert_eq!(self.deg, other.deg);
        for (a, b) in self.coef.iter_mut().zip(&other.coef) {
            *a += s * b;
        }
    }
}

/// Orthonormal Legendre polynomial of degree `j` on `[0, 1]`.
pub fn legendre(j: usize, s: f64) -> f64 {
    let t = 2.0 * s - 1.0;
    let (mut p0, mut p1) = (1.0, t);
    let p = match j {
        0 => 1.0,
        1 => t,
        _ => {
            for n in 1..j {
                let n = n as f64;
                let p2 = ((2.0 * n + 1.0) * t * p1 - n * p0) / (n + 1.0);
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    };
    libm::sqrt(2.0 * j as f64 + 1.0) * p
}

/// Legendre basis of `P_k` on an edge parameter interval.
#[derive(Clone, Copy, Debug)]
pub struct EdgeBasis {
    pub degree: usize,
}

impl EdgeBasis {
    pub fn new(k: usize) -> Self {
        EdgeBasis { degree: k }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn values(&self, s: f64) -> Vec<f64> {
        (0..=self.degree).map(|j| legendre(j, s)).collect()
    }
}

/// Nodal Lagrange basis of `P_k` on the reference triangle.
#[derive(Clone, Debug)]
pub struct ScalarBasis {
    pub degree: usize,
    nodes: Vec<Point>,
    shapes: Vec<Poly>,
}

impl ScalarBasis {
    pub fn new(k: usize) -> Result<Self> {
        check_degree(k)?;
        let nodes = lagrange_nodes(k);
        let mons = monomials(k);
        let n = nodes.len();
        let v = DenseMatrix::from_fn(n, n, |i, m| {
            let (a, b) = mons[m];
            powers(nodes[i][0], k)[a] * powers(nodes[i][1], k)[b]
        });
        // Shape j has coefficients given by column j of V^{-1}.
        let inv = DenseLu::factor(&v)?.solve_matrix(&DenseMatrix::identity(n));
        let shapes = (0..n)
            .map(|j| Poly {
                deg: k,
                coef: (0..n).map(|m| inv[(m, j)]).collect(),
            })
            .collect();
        Ok(ScalarBasis {
            degree: k,
            nodes,
            shapes,
        })
    }

    pub fn dim(&self) -> usize {
        self.shapes.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn values(&self, x: Point) -> Vec<f64> {
        self.shapes.iter().map(|p| p.eval(x)).collect()
    }

    pub fn grads(&self, x: Point) -> Vec<Point> {
        self.shapes.iter().map(|p| p.grad(x)).collect()
    }
}

/// Centroid for `k = 0`; vertices, then midpoints of edges 0, 1, 2.
pub fn lagrange_nodes(k: usize) -> Vec<Point> {
    match k {
        0 => vec![[1.0 / 3.0, 1.0 / 3.0]],
        1 => REF_VERTICES.to_vec(),
        _ => {
            let mut v = REF_VERTICES.to_vec();
            v.extend([[0.5, 0.5], [0.0, 0.5], [0.5, 0.0]]);
            v
        }
    }
}

/// Reference point on local edge `i` at local parameter `s`.
pub fn ref_edge_point(i: usize, s: f64) -> Point {
    let a = REF_VERTICES[(i + 1) % 3];
    let b = REF_VERTICES[(i + 2) % 3];
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

/// Outward unit normal and length of reference edge `i`.
pub fn ref_edge_normal(i: usize) -> (Point, f64) {
    let a = REF_VERTICES[(i + 1) % 3];
    let b = REF_VERTICES[(i + 2) % 3];
    let t = [b[0] - a[0], b[1] - a[1]];
    let len = libm::hypot(t[0], t[1]);
    ([t[1] / len, -t[0] / len], len)
}

/// `RT_k` on the reference triangle, dual to edge-normal Legendre moments
/// (`3(k+1)` of them, edge-major) followed by interior moments against
/// `[P_{k-1}]^2` monomials.
#[derive(Clone, Debug)]
pub struct RtBasis {
    pub degree: usize,
    shapes: Vec<[Poly; 2]>,
}

impl RtBasis {
    pub fn new(k: usize) -> Result<Self> {
        check_degree(k)?;
        let d = k + 1;
        let mut span: Vec<[Poly; 2]> = Vec::new();
        for &(a, b) in &monomials(k) {
            span.push([Poly::monomial(d, a, b), Poly::zero(d)]);
            span.push([Poly::zero(d), Poly::monomial(d, a, b)]);
        }
        for b in 0..=k {
            let a = k - b;
            span.push([Poly::monomial(d, a + 1, b), Poly::monomial(d, a, b + 1)]);
        }
        let n = span.len();
        debug_assert_eq!(n, dim_rt(k));
        let dofs = DofFunctionals::new(k)?;
        let dm = DenseMatrix::from_fn(n, n, |i, m| {
            dofs.apply(i, &|x| [span[m][0].eval(x), span[m][1].eval(x)])
        });
        // Shape j = sum_m C[j][m] span_m with C = D^{-T}.
        let inv = DenseLu::factor(&dm)?.solve_matrix(&DenseMatrix::identity(n));
        let shapes = (0..n)
            .map(|j| {
                let mut px = Poly::zero(d);
                let mut py = Poly::zero(d);
                for (m, s) in span.iter().enumerate() {
                    let c = inv[(m, j)];
                    px.axpy(c, &s[0]);
                    py.axpy(c, &s[1]);
                }
                [px, py]
            })
            .collect();
        Ok(RtBasis { degree: k, shapes })
    }

    pub fn dim(&self) -> usize {
        self.shapes.len()
    }

    /// Index of the `j`-th moment function on local edge `i`.
    pub fn edge_dof(&self, i: usize, j: usize) -> usize {
        i * (self.degree + 1) + j
    }

    pub fn values(&self, x: Point) -> Vec<Point> {
        self.shapes
            .iter()
            .map(|[a, b]| [a.eval(x), b.eval(x)])
            .collect()
    }

    pub fn divergence(&self, x: Point) -> Vec<f64> {
        self.shapes
            .iter()
            .map(|[a, b]| a.grad(x)[0] + b.grad(x)[1])
            .collect()
    }
}

/// Degrees of freedom of `RT_k` evaluated by quadrature.
pub struct DofFunctionals {
    k: usize,
    edge: EdgeRule,
    vol: QuadratureRule,
}

impl DofFunctionals {
    pub fn new(k: usize) -> Result<Self> {
        Self::with_degree(k, 2 * k + 2)
    }

    /// Functionals evaluated with quadrature exact to `degree`, for
    /// non-polynomial arguments.
    pub fn with_degree(k: usize, degree: usize) -> Result<Self> {
        Ok(DofFunctionals {
            k,
            edge: edge_rule(degree)?,
            vol: triangle_rule(degree)?,
        })
    }

    pub fn len(&self) -> usize {
        dim_rt(self.k)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Functional `i` applied to the reference vector field `f`.
    pub fn apply(&self, i: usize, f: &dyn Fn(Point) -> Point) -> f64 {
        let ne = 3 * (self.k + 1);
        if i < ne {
            let (e, j) = (i / (self.k + 1), i % (self.k + 1));
            let (n, len) = ref_edge_normal(e);
            self.edge
                .points
                .iter()
                .zip(&self.edge.weights)
                .map(|(&s, w)| {
                    let v = f(ref_edge_point(e, s));
                    w * len * (v[0] * n[0] + v[1] * n[1]) * legendre(j, s)
                })
                .sum()
        } else {
            let r = i - ne;
            let (m, comp) = (r / 2, r % 2);
            let (a, b) = monomials(self.k.saturating_sub(1))[m];
            self.vol
                .points
                .iter()
                .zip(&self.vol.weights)
                .map(|(&x, w)| w * f(x)[comp] * powers(x[0], a)[a] * powers(x[1], b)[b])
                .sum()
        }
    }
}

/// Basis values at one local edge's quadrature points.
#[derive(Clone, Debug)]
pub struct EdgeTable {
    /// Local parameter of each point, from vertex `i+1` to `i+2`.
    pub s: Vec<f64>,
    pub points: Vec<Point>,
    /// Scalar basis values `[q][i]`.
    pub phi: Vec<Vec<f64>>,
    /// `|e_ref| psi_ref . n_ref` per point and RT function: times the
    /// weight and a trace value this integrates `psi . n` against it.
    pub psi_flux: Vec<Vec<f64>>,
}

/// Tabulated reference data for a fixed degree and quadrature order.
#[derive(Clone, Debug)]
pub struct ReferenceElement {
    pub degree: usize,
    pub scalar: ScalarBasis,
    pub rt: RtBasis,
    pub trace: EdgeBasis,
    pub vol: QuadratureRule,
    pub edge_rule: EdgeRule,
    /// `[q][i]` at volume points.
    pub phi: Vec<Vec<f64>>,
    pub dphi: Vec<Vec<Point>>,
    pub psi: Vec<Vec<Point>>,
    pub div_psi: Vec<Vec<f64>>,
    pub edges: [EdgeTable; 3],
    /// Trace basis values at the edge points, `[q][j]`.
    pub mu: Vec<Vec<f64>>,
}

impl ReferenceElement {
    /// Tabulation with quadrature exact to `quad_degree`.
    pub fn new(k: usize, quad_degree: usize) -> Result<Self> {
        let scalar = ScalarBasis::new(k)?;
        let rt = RtBasis::new(k)?;
        let trace = EdgeBasis::new(k);
        let vol = triangle_rule(quad_degree)?;
        let erule = edge_rule(quad_degree)?;
        let phi = vol.points.iter().map(|&x| scalar.values(x)).collect();
        let dphi = vol.points.iter().map(|&x| scalar.grads(x)).collect();
        let psi = vol.points.iter().map(|&x| rt.values(x)).collect();
        let div_psi = vol.points.iter().map(|&x| rt.divergence(x)).collect();
        let table = |i: usize| {
            let (n, len) = ref_edge_normal(i);
            let points: Vec<Point> = erule.points.iter().map(|&s| ref_edge_point(i, s)).collect();
            EdgeTable {
                s: erule.points.clone(),
                phi: points.iter().map(|&x| scalar.values(x)).collect(),
                psi_flux: points
                    .iter()
                    .map(|&x| {
                        rt.values(x)
                            .iter()
                            .map(|v| len * (v[0] * n[0] + v[1] * n[1]))
                            .collect()
                    })
                    .collect(),
                points,
            }
        };
        let edges = [table(0), table(1), table(2)];
        let mu = erule.points.iter().map(|&s| trace.values(s)).collect();
        Ok(ReferenceElement {
            degree: k,
            scalar,
            rt,
            trace,
            vol,
            edge_rule: erule,
            phi,
            dphi,
            psi,
            div_psi,
            edges,
            mu,
        })
    }

    /// Assembly tabulation: quadrature exact to `2k + 2`.
    pub fn for_assembly(k: usize) -> Result<Self> {
        Self::new(k, 2 * k + 2)
    }

    pub fn n_scalar(&self) -> usize {
        self.scalar.dim()
    }

    pub fn n_rt(&self) -> usize {
        self.rt.dim()
    }

    pub fn n_trace(&self) -> usize {
        self.trace.dim()
    }
}

/// Edge parameter in the global orientation given the local one.
#[inline]
pub fn global_param(sign: f64, s_local: f64) -> f64 {
    if sign > 0.0 {
        s_local
    } else {
        1.0 - s_local
    }
}
