//! Direct solves that keep a factorization across a sequence of nearby
//! matrices and correct it by iterative refinement.

use alloc::vec::Vec;

use super::{CsrMatrix, SparseLu};
use crate::Result;

/// Relative residual a refined solve must reach, unless the fresh
/// factorization itself only reached a larger value.
pub const REFINE_TOL: f64 = 1e-13;
const MAX_REFINE: usize = 12;

#[derive(Clone, Debug, Default)]
pub struct FactorCache {
    lu: Option<SparseLu>,
    /// Relative residual reached right after the last factorization.
    floor: f64,
    pub factorizations: usize,
    pub refinement_steps: usize,
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x);
    b.iter().zip(ax).map(|(p, q)| p - q).collect()
}

impl FactorCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops the stored factorization.
    pub fn clear(&mut self) {
        self.lu = None;
    }

    pub fn has_factor(&self) -> bool {
        self.lu.is_some()
    }

    /// Solves `a x = b`, refining with the stored factors of an earlier
    /// matrix; refactors `a` (with column order `order`) when refinement
    /// stalls.
    pub fn solve(&mut self, a: &CsrMatrix, order: &[usize], b: &[f64]) -> Result<Vec<f64>> {
        let bn = norm(b);
        if bn == 0.0 {
            return Ok(alloc::vec![0.0; b.len()]);
        }
        if let Some(lu) = &self.lu {
            if lu.dim() == a.n_rows() {
                let tol = REFINE_TOL.max(4.0 * self.floor);
                if let Some(x) = refine(lu, a, b, bn, tol, None, &mut self.refinement_steps) {
                    return Ok(x);
                }
            }
        }
        let lu = SparseLu::factor_with_order(a, order.to_vec())?;
        self.factorizations += 1;
        // A fresh factorization is accepted even if refinement cannot
        // reach the tolerance.
        let x = refine(
            &lu,
            a,
            b,
            bn,
            REFINE_TOL,
            Some(2),
            &mut self.refinement_steps,
        )
        .unwrap_or_else(|| lu.solve(b));
        self.floor = norm(&residual(a, &x, b)) / bn;
        self.lu = Some(lu);
        Ok(x)
    }
}

fn refine(
    lu: &SparseLu,
    a: &CsrMatrix,
    b: &[f64],
    bn: f64,
    tol: f64,
    cap: Option<usize>,
    steps: &mut usize,
) -> Option<Vec<f64>> {
    let mut x = lu.solve(b);
    let mut r = residual(a, &x, b);
    let mut rn = norm(&r);
    let mut best = (rn, x.clone());
    for _ in 0..cap.unwrap_or(MAX_REFINE) {
        if !rn.is_finite() {
            return None;
        }
        if rn <= tol * bn {
            return Some(x);
        }
        let d = lu.solve(&r);
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
        *steps += 1;
        r = residual(a, &x, b);
        let next = norm(&r);
        if next > 0.5 * rn && cap.is_none() {
            return None;
        }
        rn = next;
        if rn < best.0 {
            best = (rn, x.clone());
        }
    }
    if rn <= tol * bn {
        Some(x)
    } else if cap.is_some() {
        Some(best.1)
    } else {
        None
    }
}
