//! Dense and sparse linear algebra used by the solvers.

mod dense;
mod iterative;
mod lu;
mod ordering;
mod reuse;
mod sparse;

use alloc::vec;
use alloc::vec::Vec;

pub use dense::{local_lu, local_solve, DenseLu, DenseMatrix};
pub use iterative::{bicgstab, cg, Ilu0, IterativeOptions, IterativeReport};
pub use lu::SparseLu;
pub use ordering::{is_permutation, nested_dissection};
pub use reuse::{FactorCache, REFINE_TOL};
pub use sparse::{CsrMatrix, TripletBuilder};

use crate::Result;

/// How a global system is solved.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum SolverKind {
    #[default]
    Direct,
    /// CG for symmetric systems, BiCGStab otherwise.
    Iterative(IterativeOptions),
}

/// Solves `a x = b`. `symmetric` selects CG over BiCGStab in iterative mode;
/// `guess` seeds the iterative solvers.
pub fn solve(
    a: &CsrMatrix,
    b: &[f64],
    kind: SolverKind,
    symmetric: bool,
    guess: Option<&[f64]>,
) -> Result<Vec<f64>> {
    match kind {
        SolverKind::Direct => Ok(SparseLu::factor(a)?.solve(b)),
        SolverKind::Iterative(opts) => {
            let mut x = match guess {
                Some(g) => g.to_vec(),
                None => vec![0.0; a.n_rows()],
            };
            if symmetric {
                cg(a, b, &mut x, opts)?;
            } else {
                bicgstab(a, b, &mut x, opts)?;
            }
            Ok(x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn sparse_lu_matches_dense(seed in proptest::collection::vec(-1.0f64..1.0, 36), rhs in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let mut d = DenseMatrix::from_row_slice(6, 6, &seed);
            for i in 0..6 {
                d[(i, i)] += 8.0;
            }
            for i in 0..6 {
                for j in 0..6 {
                    if (i + 2 * j) % 5 == 1 && i != j {
                        d[(i, j)] = 0.0;
                    }
                }
            }
            let xs = SparseLu::factor(&CsrMatrix::from_dense(&d)).unwrap().solve(&rhs);
            let xd = DenseLu::factor(&d).unwrap().solve(&rhs);
            for (a, b) in xs.iter().zip(&xd) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
