//! Krylov solvers: Jacobi-preconditioned CG and ILU(0)-preconditioned BiCGStab.

use alloc::vec;
use alloc::vec::Vec;

use super::CsrMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterativeOptions {
    /// Stop when `||r|| <= rel_tol * ||b||`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for IterativeOptions {
    fn default() -> Self {
        IterativeOptions {
            rel_tol: 1e-12,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterativeReport {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Conjugate gradients for SPD `a`. `x` holds the initial guess.
pub fn cg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    opts: IterativeOptions,
) -> Result<IterativeReport> {
    a.check_square()?;
    let n = a.n_rows();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(IterativeReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = a.matvec(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let target = opts.rel_tol * bnorm;
    for it in 0..opts.max_iter {
        let rn = norm(&r);
        if rn <= target {
            return Ok(IterativeReport {
                iterations: it,
                residual: rn / bnorm,
            });
        }
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotSymmetric);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rn = norm(&r) / bnorm;
    if rn <= opts.rel_tol {
        return Ok(IterativeReport {
            iterations: opts.max_iter,
            residual: rn,
        });
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        residual: rn,
    })
}

/// Incomplete LU on the sparsity pattern of `a`.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        a.check_square()?;
        let n = a.n_rows();
        let mut lu = a.clone();
        let mut diag = vec![0usize; n];
        for (i, d) in diag.iter_mut().enumerate() {
            *d = lu.find(i, i).ok_or(Error::SingularMatrix { pivot: i })?;
        }
        let row_ptr = lu.row_ptr().to_vec();
        let col_idx = lu.col_idx().to_vec();
        let vals = lu.values_mut();
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for p in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[p]] = p;
            }
            for p in row_ptr[i]..row_ptr[i + 1] {
                let k = col_idx[p];
                if k >= i {
                    break;
                }
                let dk = vals[diag[k]];
                if dk == 0.0 {
                    return Err(Error::SingularMatrix { pivot: k });
                }
                let l = vals[p] / dk;
                vals[p] = l;
                for q in (diag[k] + 1)..row_ptr[k + 1] {
                    let j = col_idx[q];
                    let t = pos[j];
                    if t != usize::MAX {
                        vals[t] -= l * vals[q];
                    }
                }
            }
            for p in row_ptr[i]..row_ptr[i + 1] {
                pos[col_idx[p]] = usize::MAX;
            }
            if vals[diag[i]] == 0.0 {
                return Err(Error::SingularMatrix { pivot: i });
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.diag.len();
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let v = self.lu.values();
        for i in 0..n {
            let mut s = r[i];
            for p in rp[i]..self.diag[i] {
                s -= v[p] * z[ci[p]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for p in (self.diag[i] + 1)..rp[i + 1] {
                s -= v[p] * z[ci[p]];
            }
            z[i] = s / v[self.diag[i]];
        }
    }
}

/// Right-preconditioned BiCGStab. `x` holds the initial guess.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    opts: IterativeOptions,
) -> Result<IterativeReport> {
    let n = a.n_rows();
    let pre = Ilu0::new(a)?;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(IterativeReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = a.matvec(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let target = opts.rel_tol * bnorm;
    for it in 0..opts.max_iter {
        let rn = norm(&r);
        if rn <= target {
            return Ok(IterativeReport {
                iterations: it,
                residual: rn / bnorm,
            });
        }
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut phat);
        a.matvec_into(&phat, &mut v);
        let r0v = dot(&r0, &v);
        if r0v == 0.0 {
            break;
        }
        alpha = rho / r0v;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok(IterativeReport {
                iterations: it + 1,
                residual: norm(&s) / bnorm,
            });
        }
        pre.apply(&s, &mut shat);
        a.matvec_into(&shat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
    }
    let mut res = a.matvec(x);
    for i in 0..n {
        res[i] = b[i] - res[i];
    }
    let rn = norm(&res) / bnorm;
    if rn <= opts.rel_tol {
        return Ok(IterativeReport {
            iterations: opts.max_iter,
            residual: rn,
        });
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        residual: rn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;

    fn grid(m: usize, skew: f64) -> CsrMatrix {
        let n = m * m;
        let mut t = TripletBuilder::new(n, n);
        for i in 0..m {
            for j in 0..m {
                let r = i * m + j;
                t.push(r, r, 4.0);
                if i > 0 {
                    t.push(r, r - m, -1.0 - skew);
                }
                if i + 1 < m {
                    t.push(r, r + m, -1.0 + skew);
                }
                if j > 0 {
                    t.push(r, r - 1, -1.0);
                }
                if j + 1 < m {
                    t.push(r, r + 1, -1.0);
                }
            }
        }
        t.build()
    }

    #[test]
    fn cg_poisson() {
        let a = grid(20, 0.0);
        let b = vec![1.0; 400];
        let mut x = vec![0.0; 400];
        let rep = cg(&a, &b, &mut x, IterativeOptions::default()).unwrap();
        assert!(rep.residual <= 1e-12);
        let r = a.matvec(&x);
        assert!(r.iter().zip(&b).all(|(r, b)| (r - b).abs() < 1e-9));
    }

    #[test]
    fn bicgstab_convection() {
        let a = grid(20, 0.6);
        let b: Vec<f64> = (0..400).map(|i| (i % 5) as f64).collect();
        let mut x = vec![0.0; 400];
        let rep = bicgstab(&a, &b, &mut x, IterativeOptions::default()).unwrap();
        assert!(rep.residual <= 1e-12);
    }

    #[test]
    fn cg_iteration_cap() {
        let a = grid(30, 0.0);
        let b = vec![1.0; 900];
        let mut x = vec![0.0; 900];
        let opts = IterativeOptions {
            rel_tol: 1e-14,
            max_iter: 3,
        };
        assert!(matches!(
            cg(&a, &b, &mut x, opts),
            Err(Error::NotConverged { .. })
        ));
    }
}
