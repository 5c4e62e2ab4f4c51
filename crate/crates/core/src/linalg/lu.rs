//! Left-looking sparse LU with threshold partial pivoting.

use alloc::vec;
use alloc::vec::Vec;

use super::{nested_dissection, CsrMatrix};
use crate::{Error, Result};

/// Diagonal is kept as pivot while within this fraction of the column max.
const DIAGONAL_PREFERENCE: f64 = 0.1;
/// Pivots below this fraction of `max |a_ij|` are treated as zero.
const SINGULAR_RATIO: f64 = 1e-13;

struct Csc {
    ptr: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

fn to_csc(a: &CsrMatrix) -> Csc {
    let t = a.transpose();
    Csc {
        ptr: t.row_ptr().to_vec(),
        idx: t.col_idx().to_vec(),
        val: t.values().to_vec(),
    }
}

/// `P A Q = L U`.
#[derive(Clone, Debug)]
pub struct SparseLu {
    n: usize,
    q: Vec<usize>,
    pinv: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<f64>,
}

impl SparseLu {
    /// Factors with a nested-dissection column order.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        a.check_square()?;
        let q = nested_dissection(a);
        Self::factor_with_order(a, q)
    }

    pub fn factor_with_order(a: &CsrMatrix, q: Vec<usize>) -> Result<Self> {
        a.check_square()?;
        let n = a.n_rows();
        let csc = to_csc(a);
        let tiny = SINGULAR_RATIO * a.norm_max();
        let none = usize::MAX;
        let mut pinv = vec![none; n];
        let mut lp = Vec::with_capacity(n + 1);
        let mut up = Vec::with_capacity(n + 1);
        let cap = 4 * a.nnz() + n;
        let mut li: Vec<usize> = Vec::with_capacity(cap);
        let mut lx: Vec<f64> = Vec::with_capacity(cap);
        let mut ui: Vec<usize> = Vec::with_capacity(cap);
        let mut ux: Vec<f64> = Vec::with_capacity(cap);
        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut mark = vec![false; n];

        for k in 0..n {
            lp.push(li.len());
            up.push(ui.len());
            let col = q[k];
            // Nonzero pattern of L \ A(:, col) by depth-first search.
            let mut top = n;
            for p in csc.ptr[col]..csc.ptr[col + 1] {
                let start = csc.idx[p];
                if mark[start] {
                    continue;
                }
                let mut head = 0usize;
                stack[0] = start;
                while head != usize::MAX {
                    let j = stack[head];
                    let jnew = pinv[j];
                    if !mark[j] {
                        mark[j] = true;
                        pstack[head] = if jnew == none { 0 } else { lp[jnew] + 1 };
                    }
                    let end = if jnew == none {
                        0
                    } else {
                        col_end(&lp, li.len(), jnew)
                    };
                    let mut done = true;
                    let mut pp = pstack[head];
                    while pp < end {
                        let i = li[pp];
                        pp += 1;
                        if mark[i] {
                            continue;
                        }
                        pstack[head] = pp;
                        head += 1;
                        stack[head] = i;
                        done = false;
                        break;
                    }
                    if done {
                        top -= 1;
                        xi[top] = j;
                        head = head.wrapping_sub(1);
                    }
                }
            }
            for &i in &xi[top..n] {
                mark[i] = false;
                x[i] = 0.0;
            }
            for p in csc.ptr[col]..csc.ptr[col + 1] {
                x[csc.idx[p]] = csc.val[p];
            }
            for px in top..n {
                let j = xi[px];
                let jj = pinv[j];
                if jj == none {
                    continue;
                }
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                for p in (lp[jj] + 1)..col_end(&lp, li.len(), jj) {
                    x[li[p]] -= lx[p] * xj;
                }
            }
            let mut ipiv = none;
            let mut best = -1.0;
            for &i in &xi[top..n] {
                if pinv[i] == none {
                    let t = x[i].abs();
                    if t > best {
                        best = t;
                        ipiv = i;
                    }
                } else {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                }
            }
            if ipiv == none || !(best > tiny) {
                return Err(Error::SingularMatrix { pivot: k });
            }
            if pinv[col] == none && x[col].abs() >= DIAGONAL_PREFERENCE * best {
                ipiv = col;
            }
            let pivot = x[ipiv];
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv);
            lx.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == none {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        lp.push(li.len());
        up.push(ui.len());
        for i in li.iter_mut() {
            *i = pinv[*i];
        }
        Ok(SparseLu {
            n,
            q,
            pinv,
            lp,
            li,
            lx,
            up,
            ui,
            ux,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of `L` plus `U`.
    pub fn fill(&self) -> usize {
        self.li.len() + self.ui.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.pinv[k]] = b[k];
        }
        for j in 0..n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for p in (self.lp[j] + 1)..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in (0..n).rev() {
            let d = self.up[j + 1] - 1;
            x[j] /= self.ux[d];
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for p in self.up[j]..d {
                x[self.ui[p]] -= self.ux[p] * xj;
            }
        }
        let mut out = vec![0.0; n];
        for k in 0..n {
            out[self.q[k]] = x[k];
        }
        out
    }
}

#[inline]
fn col_end(lp: &[usize], len: usize, j: usize) -> usize {
    if j + 1 < lp.len() {
        lp[j + 1]
    } else {
        len
    }
}
