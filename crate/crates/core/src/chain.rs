//! Shared evaluation of alternating propagator/insertion traces.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Interval, MatrixFn};
use crate::propagator::{path_ordered_exp_rmul, PropagatorConfig};

/// Insertion points must be strictly increasing and inside the interval.
pub(crate) fn validate_points(xs: &[f64], interval: Interval) -> Result<()> {
    for &x in xs {
        if !interval.contains(x) {
            return Err(Error::Domain(format!("insertion point {x} outside the interval")));
        }
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("insertion points must be strictly increasing".into()));
    }
    Ok(())
}

/// Trace of `B W(x_-, x_1) K_1 W(x_1, x_2) K_2 ... K_j W(x_j, x_+)` with
/// right-flow propagator segments `W` generated by `gen` and insertion
/// matrices produced by `insert`.
pub(crate) fn chain_trace(
    boundary: &CMatrix,
    gen: &MatrixFn,
    xs: &[f64],
    insert: impl Fn(usize, f64) -> Result<CMatrix>,
    interval: Interval,
    cfg: &PropagatorConfig,
) -> Result<C64> {
    let mut m = boundary.clone();
    let mut prev = interval.x_minus();
    for (i, &x) in xs.iter().enumerate() {
        m = m.mul_mat(&path_ordered_exp_rmul(gen, prev, x, cfg)?)?;
        m = m.mul_mat(&insert(i, x)?)?;
        prev = x;
    }
    m = m.mul_mat(&path_ordered_exp_rmul(gen, prev, interval.x_plus(), cfg)?)?;
    Ok(m.trace())
}
