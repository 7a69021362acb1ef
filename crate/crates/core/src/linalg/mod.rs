//! Complex dense matrices and matrix-valued functions on an interval.

mod function;
mod matrix;

pub(crate) use function::integrate_closure;
pub use function::{integrate_scalar, numeric_derivative, GridFn, InterpOrder, Interval, MatrixFn};
pub use matrix::{kron, mat_exp, mat_exp_nilpotent, nilpotent_power_table, su2_ladder, CMatrix};
