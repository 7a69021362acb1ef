//! Brute-force verification layer: truncated continuum Fock states on
//! ordered-simplex grids, and dense lattice discretizations used to check
//! the continuum limit.

mod lattice;
mod sector;

pub use lattice::{
    convergence_study, dense_assemble, discretize, discretize_cmps, product_element,
    ConvergenceRow, ConvergenceTable, LatticeKind, LatticeSystem,
};
pub use sector::{
    string_phase_apply, truncated_apply, AppliedSector, SectorState, DEFAULT_J_MAX,
    DEFAULT_NODES_PER_AXIS,
};
