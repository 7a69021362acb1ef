//! Numerical engine for continuous matrix product states (cMPS),
//! operators (cMPO), and unitaries (cMPU) on a one-dimensional interval.
//!
//! The crate provides:
//!
//! - dense complex linear algebra and matrix-valued functions
//!   ([`linalg`]);
//! - path-ordered exponentials of matrix generators ([`propagator`]), the
//!   single kernel behind every coefficient, inner product, and boundary
//!   matrix;
//! - the cMPS and cMPO data types with their Fock-sector coefficients and
//!   operator algebra ([`cmps`], [`cmpo`]);
//! - sampled unitarity certification and the interaction-picture form of
//!   bulk-uniform tensors ([`unitarity`]);
//! - constructors for the named cMPU families together with their closed
//!   form phase oracles ([`catalog`]);
//! - a brute-force verification layer: truncated continuum Fock states on
//!   simplex grids and dense lattice discretizations with first-order
//!   tensor scalings ([`oracle`]).

pub mod catalog;
mod chain;
pub mod cmpo;
pub mod cmps;
pub mod error;
pub mod linalg;
pub mod oracle;
pub mod propagator;
pub mod seeds;
pub mod unitarity;

pub use error::{Error, Result};
pub use linalg::{CMatrix, Interval, MatrixFn};

/// Format a complex number as `re+imi` with 12 significant digits.
pub fn format_complex(z: num_complex::Complex64) -> String {
    if z.im < 0.0 {
        format!("{:.11e}{:.11e}i", z.re, z.im)
    } else {
        format!("{:.11e}+{:.11e}i", z.re, z.im)
    }
}
