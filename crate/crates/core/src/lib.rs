//! Combined hybridized mixed / upwind mixed-hybrid discontinuous Galerkin
//! solver for incompressible wormhole propagation in two dimensions.
//!
//! The crate is `no_std` (it needs `alloc`) and carries every numerical
//! piece of the method: the triangular mesh, reference bases and quadrature,
//! the discrete field containers, the porosity cut-off update, the hybrid
//! mixed pressure solver, the upwind mixed-hybrid concentration solver, the
//! static-condensation engine with its sparse linear algebra, and the time
//! stepping / convergence-study drivers. File formats and the command line
//! live in the companion `wormhole` crate.
//!
//! Module map:
//!
//! - [`mesh`]: uniform conforming triangulations of a rectangle
//! - [`quadrature`], [`basis`]: reference-element machinery
//! - [`fields`]: DOF containers, projections, norms, observed orders
//! - [`physics`], [`manufactured`]: model coefficients and benchmark cases
//! - [`porosity`]: the unconditionally bounded porosity update
//! - [`pressure`], [`concentration`]: the two hybridized solvers
//! - [`condense`], [`linalg`]: element elimination and global solves
//! - [`driver`], [`study`], [`wormhole`]: time loop, convergence tables,
//!   and the dissolution scenario

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod basis;
pub mod concentration;
pub mod condense;
pub mod driver;
mod error;
pub mod fields;
pub mod linalg;
pub mod manufactured;
pub mod mesh;
pub mod physics;
pub mod porosity;
pub mod pressure;
pub mod quadrature;
pub mod reference;
pub mod study;
pub mod wormhole;

pub use error::{Error, Result};
pub use mesh::{BoundaryTag, Mesh, Point, Rect};

/// Polynomial degrees the solvers accept.
pub const SUPPORTED_DEGREES: [usize; 3] = [0, 1, 2];

pub(crate) fn check_degree(k: usize) -> Result<()> {
    if SUPPORTED_DEGREES.contains(&k) {
        Ok(())
    } else {
        Err(Error::UnsupportedDegree(k))
    }
}
