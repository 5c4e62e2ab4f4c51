use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

/// Errors raised by mesh construction, discretization and the solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Rectangle or cell counts do not describe a valid mesh.
    InvalidMesh(&'static str),
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    /// Polynomial degree outside {0, 1, 2}.
    UnsupportedDegree(usize),
    /// Quadrature exactness beyond what the rule generator supports.
    UnsupportedQuadrature(usize),
    /// A model quantity left its admissible range (e.g. porosity outside (0, 1)).
    Domain {
        what: &'static str,
        value: f64,
    },
    InvalidParameter {
        name: &'static str,
        value: f64,
    },
    /// Two containers that must share a mesh or degree do not.
    Mismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    SingularLocalBlock {
        element: usize,
    },
    SingularMatrix {
        pivot: usize,
    },
    NotConverged {
        iterations: usize,
        residual: f64,
    },
    NotSymmetric,
    UnknownCase(String),
    /// Two boundary descriptions claim the same edge.
    BoundaryConflict(&'static str),
    /// A field picked up NaN or infinity.
    NonFinite {
        what: &'static str,
    },
    /// A failure inside a time step, annotated with the step index.
    Step {
        step: usize,
        source: Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::Step { .. } => self,
            other => Error::Step {
                step,
                source: Box::new(other),
            },
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidMesh(msg) => write!(f, "invalid mesh: {msg}"),
            Error::IndexOutOfRange { what, index, len } => {
                write!(f, "{what} index {index} out of range (len {len})")
            }
            Error::UnsupportedDegree(k) => {
                write!(f, "unsupported degree {k} (supported: 0, 1, 2)")
            }
            Error::UnsupportedQuadrature(d) => {
                write!(f, "unsupported quadrature exactness {d}")
            }
            Error::Domain { what, value } => write!(f, "{what} out of range: {value}"),
            Error::InvalidParameter { name, value } => {
                write!(f, "invalid parameter {name} = {value}")
            }
            Error::Mismatch {
                what,
                expected,
                found,
            } => write!(f, "{what} mismatch: expected {expected}, found {found}"),
            Error::SingularLocalBlock { element } => {
                write!(f, "singular local block on element {element}")
            }
            Error::SingularMatrix { pivot } => write!(f, "singular matrix at pivot {pivot}"),
            Error::NotConverged {
                iterations,
                residual,
            } => write!(
                f,
                "iterative solver did not converge in {iterations} iterations (residual {residual:e})"
            ),
            Error::NotSymmetric => write!(f, "matrix is not flagged symmetric"),
            Error::UnknownCase(name) => write!(f, "unknown case `{name}`"),
            Error::BoundaryConflict(msg) => write!(f, "conflicting boundary conditions: {msg}"),
            Error::NonFinite { what } => write!(f, "non-finite values in {what}"),
            Error::Step { step, source } => write!(f, "time step {step}: {source}"),
        }
    }
}

impl core::error::Error for Error {}
