//! Static condensation: element unknowns are eliminated locally and a
//! global system is assembled for edge-trace unknowns only.
//!
//! Each element contributes
//!
//! ```text
//! M x + G l = F        (element rows)
//! H x + E l = r        (its share of the trace rows)
//! ```
//!
//! where `l` holds the element's trace coefficients in local edge
//! orientation. The trace system is `sum S (E - H M^-1 G) S` with right-hand
//! side `sum S (r - H M^-1 F)`, `S` mapping local to global orientation.

use alloc::vec;
use alloc::vec::Vec;

use crate::fields::{DgField, RtField, TraceField};
use crate::linalg::{
    nested_dissection, solve, CsrMatrix, DenseLu, DenseMatrix, FactorCache, SolverKind, SparseLu,
    TripletBuilder,
};
use crate::{Error, Mesh, Result};

#[derive(Clone, Debug)]
pub struct LocalSystem {
    pub m: DenseMatrix,
    pub g: DenseMatrix,
    pub f: Vec<f64>,
    pub h: DenseMatrix,
    pub e: DenseMatrix,
    pub r: Vec<f64>,
}

impl LocalSystem {
    pub fn zeros(n_local: usize, n_trace: usize) -> Self {
        LocalSystem {
            m: DenseMatrix::zeros(n_local, n_local),
            g: DenseMatrix::zeros(n_local, n_trace),
            f: vec![0.0; n_local],
            h: DenseMatrix::zeros(n_trace, n_local),
            e: DenseMatrix::zeros(n_trace, n_trace),
            r: vec![0.0; n_trace],
        }
    }
}

/// Global numbering of trace coefficients: edge `e`, Legendre index `j`
/// maps to `e (k+1) + j`.
#[derive(Clone, Debug)]
pub struct TraceLayout {
    k1: usize,
    n_edges: usize,
    dofs: Vec<usize>,
    signs: Vec<f64>,
}

impl TraceLayout {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        let k1 = k + 1;
        let nt = 3 * k1;
        let mut dofs = Vec::with_capacity(mesh.n_elements() * nt);
        let mut signs = Vec::with_capacity(mesh.n_elements() * nt);
        for t in 0..mesh.n_elements() {
            let edges = mesh.element_edges(t);
            let sg = mesh.element_signs(t);
            for i in 0..3 {
                for j in 0..k1 {
                    dofs.push(edges[i] * k1 + j);
                    // Reversing the parameter flips odd Legendre polynomials.
                    signs.push(if sg[i] < 0.0 && j % 2 == 1 { -1.0 } else { 1.0 });
                }
            }
        }
        TraceLayout {
            k1,
            n_edges: mesh.n_edges(),
            dofs,
            signs,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_edges * self.k1
    }

    pub fn per_element(&self) -> usize {
        3 * self.k1
    }

    pub fn n_elements(&self) -> usize {
        self.dofs.len() / self.per_element()
    }

    pub fn element_dofs(&self, t: usize) -> &[usize] {
        let n = self.per_element();
        &self.dofs[t * n..(t + 1) * n]
    }

    pub fn element_signs(&self, t: usize) -> &[f64] {
        let n = self.per_element();
        &self.signs[t * n..(t + 1) * n]
    }

    /// Element-local (local orientation) view of a global trace vector.
    pub fn gather(&self, t: usize, global: &[f64]) -> Vec<f64> {
        self.element_dofs(t)
            .iter()
            .zip(self.element_signs(t))
            .map(|(&d, s)| s * global[d])
            .collect()
    }
}

/// Prescribed trace values and extra right-hand side on trace rows.
#[derive(Clone, Debug)]
pub struct Constraints {
    pub fixed: Vec<Option<f64>>,
    pub extra_rhs: Vec<f64>,
}

impl Constraints {
    pub fn free(n_dofs: usize) -> Self {
        Constraints {
            fixed: vec![None; n_dofs],
            extra_rhs: vec![0.0; n_dofs],
        }
    }

    pub fn fixed_mask(&self) -> Vec<bool> {
        self.fixed.iter().map(Option::is_some).collect()
    }
}

/// Sparsity of the condensed matrix over free trace dofs, with the
/// position of every element-matrix entry precomputed.
#[derive(Clone, Debug)]
pub struct Pattern {
    free_index: Vec<usize>,
    free_dofs: Vec<usize>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    positions: Vec<usize>,
    ordering: Vec<usize>,
    nt: usize,
}

const FIXED: usize = usize::MAX;

impl Pattern {
    pub fn new(layout: &TraceLayout, fixed: &[bool]) -> Self {
        let n = layout.n_dofs();
        let mut free_index = vec![FIXED; n];
        let mut free_dofs = Vec::new();
        for d in 0..n {
            if !fixed[d] {
                free_index[d] = free_dofs.len();
                free_dofs.push(d);
            }
        }
        let nf = free_dofs.len();
        let nt = layout.per_element();
        let mut trip = TripletBuilder::with_capacity(nf, nf, layout.n_elements() * nt * nt);
        for t in 0..layout.n_elements() {
            for &a in layout.element_dofs(t) {
                for &b in layout.element_dofs(t) {
                    let (fa, fb) = (free_index[a], free_index[b]);
                    if fa != FIXED && fb != FIXED {
                        trip.push(fa, fb, 1.0);
                    }
                }
            }
        }
        let shape = trip.build();
        let mut positions = Vec::with_capacity(layout.n_elements() * nt * nt);
        for t in 0..layout.n_elements() {
            for &a in layout.element_dofs(t) {
                for &b in layout.element_dofs(t) {
                    let (fa, fb) = (free_index[a], free_index[b]);
                    positions.push(if fa != FIXED && fb != FIXED {
                        shape.find(fa, fb).unwrap()
                    } else {
                        FIXED
                    });
                }
            }
        }
        let ordering = nested_dissection(&shape);
        Pattern {
            free_index,
            free_dofs,
            row_ptr: shape.row_ptr().to_vec(),
            col_idx: shape.col_idx().to_vec(),
            positions,
            ordering,
            nt,
        }
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Free-dof index of global dof `d`, if free.
    pub fn free_index(&self, d: usize) -> Option<usize> {
        let i = self.free_index[d];
        (i != FIXED).then_some(i)
    }

    fn element_positions(&self, t: usize) -> &[usize] {
        let n = self.nt * self.nt;
        &self.positions[t * n..(t + 1) * n]
    }
}

/// Element data kept after elimination for right-hand sides and recovery.
#[derive(Clone, Debug)]
struct ElementFactor {
    lu: DenseLu,
    minv_g: DenseMatrix,
    h: DenseMatrix,
    /// `S (E - H M^-1 G) S`.
    condensed: DenseMatrix,
}

/// Condensed trace operator, reusable for several right-hand sides.
#[derive(Clone, Debug)]
pub struct CondensedOperator {
    factors: Vec<ElementFactor>,
    matrix: CsrMatrix,
    direct: Option<SparseLu>,
}

/// Options for [`CondensedOperator::solve_with`].
#[derive(Debug, Default)]
pub struct SolveOptions<'a> {
    pub kind: SolverKind,
    /// Selects CG over BiCGStab for iterative solves.
    pub symmetric: bool,
    /// All trace coefficients of a previous solution; seeds iterative solves.
    pub guess: Option<&'a [f64]>,
    /// Factorization kept between direct solves of nearby systems.
    pub cache: Option<&'a mut FactorCache>,
}

/// Result of a condensed solve.
#[derive(Clone, Debug)]
pub struct CondensedSolution {
    /// All trace coefficients, prescribed ones included.
    pub traces: Vec<f64>,
    /// Element unknowns per element.
    pub locals: Vec<Vec<f64>>,
    /// `||A l - b|| / ||b||` of the free-dof system.
    pub residual: f64,
}

impl CondensedOperator {
    /// Eliminates every element block. `blocks` yields `(M, G, H, E)`.
    pub fn new<I>(layout: &TraceLayout, pattern: &Pattern, blocks: I) -> Result<Self>
    where
        I: IntoIterator<Item = Result<(DenseMatrix, DenseMatrix, DenseMatrix, DenseMatrix)>>,
    {
        let nt = layout.per_element();
        let mut values = vec![0.0; pattern.nnz()];
        let mut factors = Vec::with_capacity(layout.n_elements());
        for (t, block) in blocks.into_iter().enumerate() {
            let (m, g, h, e) = block?;
            let lu = DenseLu::factor(&m).map_err(|_| Error::SingularLocalBlock { element: t })?;
            let minv_g = lu.solve_matrix(&g);
            let hmg = h.matmul(&minv_g);
            let s = layout.element_signs(t);
            let condensed =
                DenseMatrix::from_fn(nt, nt, |a, b| s[a] * s[b] * (e[(a, b)] - hmg[(a, b)]));
            for (idx, &pos) in pattern.element_positions(t).iter().enumerate() {
                if pos != FIXED {
                    values[pos] += condensed[(idx / nt, idx % nt)];
                }
            }
            factors.push(ElementFactor {
                lu,
                minv_g,
                h,
                condensed,
            });
        }
        if factors.len() != layout.n_elements() {
            return Err(Error::Mismatch {
                what: "element blocks",
                expected: layout.n_elements(),
                found: factors.len(),
            });
        }
        let nf = pattern.n_free();
        let matrix = CsrMatrix::from_parts(
            nf,
            nf,
            pattern.row_ptr.clone(),
            pattern.col_idx.clone(),
            values,
        )?;
        Ok(CondensedOperator {
            factors,
            matrix,
            direct: None,
        })
    }

    pub fn from_locals(
        layout: &TraceLayout,
        pattern: &Pattern,
        locals: &[LocalSystem],
    ) -> Result<Self> {
        Self::new(
            layout,
            pattern,
            locals
                .iter()
                .map(|l| Ok((l.m.clone(), l.g.clone(), l.h.clone(), l.e.clone()))),
        )
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Factors the trace matrix once for repeated direct solves.
    pub fn factor(&mut self, pattern: &Pattern) -> Result<()> {
        if self.matrix.n_rows() > 0 {
            self.direct = Some(SparseLu::factor_with_order(
                &self.matrix,
                pattern.ordering.clone(),
            )?);
        }
        Ok(())
    }

    /// Solves with element right-hand sides `f[t]`, `r[t]`.
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        &self,
        layout: &TraceLayout,
        pattern: &Pattern,
        f: &[Vec<f64>],
        r: &[Vec<f64>],
        constraints: &Constraints,
        kind: SolverKind,
        symmetric: bool,
    ) -> Result<CondensedSolution> {
        let opts = SolveOptions {
            kind,
            symmetric,
            guess: None,
            cache: None,
        };
        self.solve_with(layout, pattern, f, r, constraints, opts)
    }

    /// As [`solve`](Self::solve) with extra options.
    pub fn solve_with(
        &self,
        layout: &TraceLayout,
        pattern: &Pattern,
        f: &[Vec<f64>],
        r: &[Vec<f64>],
        constraints: &Constraints,
        opts: SolveOptions<'_>,
    ) -> Result<CondensedSolution> {
        let SolveOptions {
            kind,
            symmetric,
            guess,
            cache,
        } = opts;
        let nt = layout.per_element();
        let nf = pattern.n_free();
        let mut rhs = vec![0.0; nf];
        for (fi, &d) in pattern.free_dofs.iter().enumerate() {
            rhs[fi] = constraints.extra_rhs[d];
        }
        let mut minv_f = Vec::with_capacity(self.factors.len());
        for (t, fac) in self.factors.iter().enumerate() {
            let mf = fac.lu.solve(&f[t]);
            let hmf = fac.h.matvec(&mf);
            let s = layout.element_signs(t);
            let dofs = layout.element_dofs(t);
            for a in 0..nt {
                let Some(fa) = pattern.free_index(dofs[a]) else {
                    continue;
                };
                let mut v = s[a] * (r[t][a] - hmf[a]);
                for b in 0..nt {
                    if let Some(val) = constraints.fixed[dofs[b]] {
                        v -= fac.condensed[(a, b)] * val;
                    }
                }
                rhs[fa] += v;
            }
            minv_f.push(mf);
        }
        let free_sol = if nf == 0 {
            Vec::new()
        } else {
            match (&self.direct, kind, cache) {
                (Some(lu), SolverKind::Direct, _) => lu.solve(&rhs),
                (None, SolverKind::Direct, Some(cache)) => {
                    cache.solve(&self.matrix, &pattern.ordering, &rhs)?
                }
                (None, SolverKind::Direct, None) => {
                    SparseLu::factor_with_order(&self.matrix, pattern.ordering.clone())?.solve(&rhs)
                }
                _ => {
                    let g: Option<Vec<f64>> = guess
                        .filter(|g| g.len() == layout.n_dofs())
                        .map(|g| pattern.free_dofs.iter().map(|&d| g[d]).collect());
                    solve(&self.matrix, &rhs, kind, symmetric, g.as_deref())?
                }
            }
        };
        let residual = relative_residual(&self.matrix, &free_sol, &rhs);
        let mut traces = vec![0.0; layout.n_dofs()];
        for (d, slot) in traces.iter_mut().enumerate() {
            *slot = match constraints.fixed[d] {
                Some(v) => v,
                None => free_sol[pattern.free_index[d]],
            };
        }
        let locals = self
            .factors
            .iter()
            .enumerate()
            .map(|(t, fac)| {
                let l = layout.gather(t, &traces);
                let mg = fac.minv_g.matvec(&l);
                minv_f[t].iter().zip(mg).map(|(a, b)| a - b).collect()
            })
            .collect();
        Ok(CondensedSolution {
            traces,
            locals,
            residual,
        })
    }
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    let ax = a.matvec(x);
    let num: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    let den: f64 = b.iter().map(|v| v * v).sum();
    if den == 0.0 {
        libm::sqrt(num)
    } else {
        libm::sqrt(num / den)
    }
}

/// One-shot condensed solve.
pub fn condense_and_solve(
    layout: &TraceLayout,
    locals: &[LocalSystem],
    constraints: &Constraints,
    kind: SolverKind,
    symmetric: bool,
) -> Result<CondensedSolution> {
    let pattern = Pattern::new(layout, &constraints.fixed_mask());
    let op = CondensedOperator::from_locals(layout, &pattern, locals)?;
    let f: Vec<Vec<f64>> = locals.iter().map(|l| l.f.clone()).collect();
    let r: Vec<Vec<f64>> = locals.iter().map(|l| l.r.clone()).collect();
    op.solve(layout, &pattern, &f, &r, constraints, kind, symmetric)
}

/// Dense monolithic solve of all element and trace unknowns together,
/// used to check the condensed path.
pub fn monolithic_solve(
    layout: &TraceLayout,
    locals: &[LocalSystem],
    constraints: &Constraints,
) -> Result<CondensedSolution> {
    let n_loc: Vec<usize> = locals.iter().map(|l| l.f.len()).collect();
    let mut offset = vec![0usize; locals.len() + 1];
    for (t, n) in n_loc.iter().enumerate() {
        offset[t + 1] = offset[t] + n;
    }
    let base = offset[locals.len()];
    let n = base + layout.n_dofs();
    let mut a = DenseMatrix::zeros(n, n);
    let mut b = vec![0.0; n];
    for (t, l) in locals.iter().enumerate() {
        let o = offset[t];
        let dofs = layout.element_dofs(t);
        let s = layout.element_signs(t);
        for i in 0..n_loc[t] {
            for j in 0..n_loc[t] {
                a[(o + i, o + j)] = l.m[(i, j)];
            }
            for (q, &d) in dofs.iter().enumerate() {
                a[(o + i, base + d)] += l.g[(i, q)] * s[q];
            }
            b[o + i] = l.f[i];
        }
        for (p, &dp) in dofs.iter().enumerate() {
            let row = base + dp;
            for j in 0..n_loc[t] {
                a[(row, o + j)] += s[p] * l.h[(p, j)];
            }
            for (q, &dq) in dofs.iter().enumerate() {
                a[(row, base + dq)] += s[p] * l.e[(p, q)] * s[q];
            }
            b[row] += s[p] * l.r[p];
        }
    }
    for d in 0..layout.n_dofs() {
        let row = base + d;
        b[row] += constraints.extra_rhs[d];
        if let Some(v) = constraints.fixed[d] {
            for j in 0..n {
                a[(row, j)] = 0.0;
            }
            a[(row, row)] = 1.0;
            b[row] = v;
        }
    }
    let x = DenseLu::factor(&a)?.solve(&b);
    let locals_out = (0..locals.len())
        .map(|t| x[offset[t]..offset[t + 1]].to_vec())
        .collect();
    let ax = a.matvec(&x);
    let num: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    Ok(CondensedSolution {
        traces: x[base..].to_vec(),
        locals: locals_out,
        residual: libm::sqrt(num / den),
    })
}

/// Splits element solutions `[v, s]` into an RT field and a DG field.
pub(crate) fn split_locals(
    mesh: &Mesh,
    k: usize,
    locals: &[Vec<f64>],
    n_rt: usize,
) -> Result<(RtField, DgField)> {
    let mut v = Vec::with_capacity(locals.len() * n_rt);
    let mut s = Vec::new();
    for l in locals {
        v.extend_from_slice(&l[..n_rt]);
        s.extend_from_slice(&l[n_rt..]);
    }
    Ok((
        RtField::from_coeffs(mesh, k, v)?,
        DgField::from_coeffs(mesh, k, s)?,
    ))
}

/// Residual of `[M G; H E]` at `(v, s, l)` for element unknowns stored as
/// an RT and a DG field.
pub(crate) fn system_residual(
    layout: &TraceLayout,
    locals: &[LocalSystem],
    cons: &Constraints,
    v: &RtField,
    s: &DgField,
    l: &TraceField,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut trace_rows = cons.extra_rhs.clone();
    let mut trace_scale = vec![0.0f64; layout.n_dofs()];
    for (t, loc) in locals.iter().enumerate() {
        let mut x = v.block(t).to_vec();
        x.extend_from_slice(s.block(t));
        let lt = layout.gather(t, l.coeffs());
        let mx = loc.m.matvec(&x);
        let gl = loc.g.matvec(&lt);
        for i in 0..x.len() {
            worst = worst.max((mx[i] + gl[i] - loc.f[i]).abs());
            scale = scale.max(mx[i].abs()).max(gl[i].abs()).max(loc.f[i].abs());
        }
        let hx = loc.h.matvec(&x);
        let el = loc.e.matvec(&lt);
        let sg = layout.element_signs(t);
        for (a, &d) in layout.element_dofs(t).iter().enumerate() {
            let contrib = sg[a] * (hx[a] + el[a] - loc.r[a]);
            trace_rows[d] -= contrib;
            trace_scale[d] = trace_scale[d].max(contrib.abs());
        }
    }
    for d in 0..layout.n_dofs() {
        if cons.fixed[d].is_none() {
            worst = worst.max(trace_rows[d].abs());
            scale = scale.max(trace_scale[d]);
        }
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rect;

    /// Random-ish but well-conditioned local systems.
    fn synthetic(layout: &TraceLayout, n_loc: usize) -> Vec<LocalSystem> {
        let nt = layout.per_element();
        let mut seed: u64 = 12345;
        let mut rnd = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        (0..layout.n_elements())
            .map(|_| {
                let mut l = LocalSystem::zeros(n_loc, nt);
                for i in 0..n_loc {
                    for j in 0..n_loc {
                        l.m[(i, j)] = rnd() + if i == j { 4.0 } else { 0.0 };
                    }
                    for q in 0..nt {
                        l.g[(i, q)] = rnd();
                        l.h[(q, i)] = rnd();
                    }
                    l.f[i] = rnd();
                }
                for p in 0..nt {
                    for q in 0..nt {
                        l.e[(p, q)] = 0.2 * rnd() + if p == q { 3.0 } else { 0.0 };
                    }
                    l.r[p] = rnd();
                }
                l
            })
            .collect()
    }

    #[test]
    fn condensed_matches_monolithic() {
        for k in 0..=1 {
            let mesh = Mesh::build_uniform(2, 2, Rect::UNIT).unwrap();
            let layout = TraceLayout::new(&mesh, k);
            let locals = synthetic(&layout, 5);
            let mut cons = Constraints::free(layout.n_dofs());
            cons.fixed[0] = Some(0.7);
            cons.extra_rhs[3] = 0.25;
            let a = condense_and_solve(&layout, &locals, &cons, SolverKind::Direct, false).unwrap();
            let b = monolithic_solve(&layout, &locals, &cons).unwrap();
            for (x, y) in a.traces.iter().zip(&b.traces) {
                assert!((x - y).abs() < 1e-10);
            }
            for (x, y) in a.locals.iter().flatten().zip(b.locals.iter().flatten()) {
                assert!((x - y).abs() < 1e-10);
            }
            assert!(a.residual < 1e-12);
        }
    }

    #[test]
    fn operator_reuse_matches_fresh_solve() {
        let mesh = Mesh::build_uniform(3, 2, Rect::UNIT).unwrap();
        let layout = TraceLayout::new(&mesh, 1);
        let locals = synthetic(&layout, 4);
        let cons = Constraints::free(layout.n_dofs());
        let pattern = Pattern::new(&layout, &cons.fixed_mask());
        let mut op = CondensedOperator::from_locals(&layout, &pattern, &locals).unwrap();
        op.factor(&pattern).unwrap();
        let f: Vec<Vec<f64>> = locals
            .iter()
            .map(|l| l.f.iter().map(|v| 2.0 * v).collect())
            .collect();
        let r: Vec<Vec<f64>> = locals
            .iter()
            .map(|l| l.r.iter().map(|v| 2.0 * v).collect())
            .collect();
        let a = op
            .solve(&layout, &pattern, &f, &r, &cons, SolverKind::Direct, false)
            .unwrap();
        let fresh = condense_and_solve(&layout, &locals, &cons, SolverKind::Direct, false).unwrap();
        for (x, y) in a.traces.iter().zip(&fresh.traces) {
            assert!((x - 2.0 * y).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_block_reports_element() {
        let mesh = Mesh::build_uniform(1, 1, Rect::UNIT).unwrap();
        let layout = TraceLayout::new(&mesh, 0);
        let mut locals = synthetic(&layout, 2);
        locals[1].m = DenseMatrix::zeros(2, 2);
        let cons = Constraints::free(layout.n_dofs());
        let err =
            condense_and_solve(&layout, &locals, &cons, SolverKind::Direct, false).unwrap_err();
        assert!(matches!(err, Error::SingularLocalBlock { element: 1 }));
    }

    #[test]
    fn gather_applies_orientation() {
        let mesh = Mesh::build_uniform(2, 2, Rect::UNIT).unwrap();
        let layout = TraceLayout::new(&mesh, 2);
        let global: Vec<f64> = (0..layout.n_dofs()).map(|d| d as f64 + 1.0).collect();
        for t in 0..mesh.n_elements() {
            let loc = layout.gather(t, &global);
            let sg = mesh.element_signs(t);
            for i in 0..3 {
                assert_eq!(loc[3 * i + 1].signum(), sg[i]);
                assert!(loc[3 * i] > 0.0 && loc[3 * i + 2] > 0.0);
            }
        }
    }
}
