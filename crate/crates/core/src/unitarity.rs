//! Sampled unitarity certification.
//!
//! An operator is unitary exactly when every coefficient of both two-sided
//! products (adjoint-times-operator and operator-times-adjoint) matches
//! the identity: all-A strings give 1 and any string containing an L or R
//! channel gives 0, for every sector and every point tuple. No finite
//! procedure quantifies over all sectors, so the report is a certificate
//! only up to the sampled sectors and points.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmpo::{Cmpo, CoeffEngine, CoeffLabel};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, MatrixFn};
use crate::propagator::{path_ordered_exp, PropagatorConfig};
use crate::seeds::{random_ordered_points, rng_for};

/// Which two-sided product to probe.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum ProductSide {
    /// `O† O`
    AdjointTimesOp,
    /// `O O†`
    OpTimesAdjoint,
}

/// Outcome of a sampled unitarity check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnitarityReport {
    pub passed: bool,
    /// Largest `|coeff - 1|` over all-A probes.
    pub max_a_deviation: f64,
    /// Largest `|coeff|` over probes containing an L or R channel.
    pub max_offdiag: f64,
    /// Coefficient probes evaluated per sector, summed over both products.
    pub probes_per_sector: Vec<usize>,
    pub j_max: usize,
    pub tol: f64,
    pub seed: u64,
}

impl UnitarityReport {
    fn from_deviations(
        max_a: f64,
        max_off: f64,
        probes: Vec<usize>,
        j_max: usize,
        tol: f64,
        seed: u64,
    ) -> UnitarityReport {
        UnitarityReport {
            passed: max_a <= tol && max_off <= tol,
            max_a_deviation: max_a,
            max_offdiag: max_off,
            probes_per_sector: probes,
            j_max,
            tol,
            seed,
        }
    }

    fn merge(self, other: UnitarityReport) -> UnitarityReport {
        let probes = self
            .probes_per_sector
            .iter()
            .zip(&other.probes_per_sector)
            .map(|(a, b)| a + b)
            .collect();
        UnitarityReport::from_deviations(
            self.max_a_deviation.max(other.max_a_deviation),
            self.max_offdiag.max(other.max_offdiag),
            probes,
            self.j_max,
            self.tol,
            self.seed,
        )
    }
}

fn side_index(side: ProductSide) -> u64 {
    match side {
        ProductSide::AdjointTimesOp => 0,
        ProductSide::OpTimesAdjoint => 1,
    }
}

/// Probe one of the two-sided products; diagnostics helper, not a
/// certificate on its own.
pub fn check_unitary_side(
    op: &Cmpo,
    side: ProductSide,
    j_max: usize,
    samples_per_j: usize,
    tol: f64,
    seed: u64,
) -> Result<UnitarityReport> {
    if j_max < 1 || samples_per_j < 1 {
        return Err(Error::Validation("need j_max >= 1 and samples_per_j >= 1".into()));
    }
    let adj = op.adjoint();
    let product = match side {
        ProductSide::AdjointTimesOp => adj.compose(op)?,
        ProductSide::OpTimesAdjoint => op.compose(&adj)?,
    };
    let engine = CoeffEngine::new(&product, PropagatorConfig::default());
    let iv = op.interval();

    // sector 0: the single empty all-A probe
    let empty = engine.coefficient(&[], &[])?;
    let mut max_a = (empty - num_complex::Complex64::new(1.0, 0.0)).norm();
    let mut max_off = 0.0f64;
    let mut probes = vec![0usize; j_max + 1];
    probes[0] = 1;

    let tasks: Vec<(usize, usize)> = (1..=j_max)
        .flat_map(|j| (0..samples_per_j).map(move |k| (j, k)))
        .collect();
    let results: Vec<Result<(usize, f64, f64)>> = tasks
        .par_iter()
        .map(|&(j, k)| {
            let mut rng = rng_for(&[seed, side_index(side), j as u64, k as u64]);
            let xs = random_ordered_points(&mut rng, j, iv.x_minus(), iv.x_plus());
            let all_a = vec![CoeffLabel::A; j];
            let a_coeff = engine.coefficient(&all_a, &xs)?;
            let a_dev = (a_coeff - num_complex::Complex64::new(1.0, 0.0)).norm();
            // a label string with at least one non-A channel
            let labels = loop {
                let candidate: Vec<CoeffLabel> = (0..j)
                    .map(|_| match rng.gen::<u32>() % 3 {
                        0 => CoeffLabel::L,
                        1 => CoeffLabel::R,
                        _ => CoeffLabel::A,
                    })
                    .collect();
                if candidate.iter().any(|l| *l != CoeffLabel::A) {
                    break candidate;
                }
            };
            let off = engine.coefficient(&labels, &xs)?.norm();
            Ok((j, a_dev, off))
        })
        .collect();
    for r in results {
        let (j, a_dev, off) = r?;
        max_a = max_a.max(a_dev);
        max_off = max_off.max(off);
        probes[j] += 2;
    }
    Ok(UnitarityReport::from_deviations(max_a, max_off, probes, j_max, tol, seed))
}

/// Probe both `O† O` and `O O†` at seeded ordered tuples of each sector up
/// to `j_max` and report the worst deviations.
///
/// Probes are keyed by `(seed, side, sector, sample index)`, so enlarging
/// `samples_per_j` extends the probe set without reshuffling it and the
/// reported maxima are monotone in the sample count.
pub fn check_unitary(
    op: &Cmpo,
    j_max: usize,
    samples_per_j: usize,
    tol: f64,
    seed: u64,
) -> Result<UnitarityReport> {
    let a = check_unitary_side(op, ProductSide::AdjointTimesOp, j_max, samples_per_j, tol, seed)?;
    let b = check_unitary_side(op, ProductSide::OpTimesAdjoint, j_max, samples_per_j, tol, seed)?;
    Ok(a.merge(b))
}

/// Dressed tensors of a bulk-uniform operator: constant insertions
/// conjugated by the free propagator from the left endpoint, and the
/// boundary absorbed into the full line.
#[derive(Clone, Debug)]
pub struct DressedTensors {
    pub boundary: CMatrix,
    pub k_l: MatrixFn,
    pub k_r: MatrixFn,
    pub k_a: MatrixFn,
}

impl DressedTensors {
    pub fn dressed(&self, label: CoeffLabel) -> &MatrixFn {
        match label {
            CoeffLabel::L => &self.k_l,
            CoeffLabel::R => &self.k_r,
            CoeffLabel::A => &self.k_a,
        }
    }
}

/// Rewrite a bulk-uniform operator in the interaction picture with
/// respect to its free generator: returns `calB = V(x_-, x_+) B` and the
/// dressed insertions `calK(x) = V(x_-, x) K V(x, x_-)` such that
/// `Tr(calB calK(x_1) ... calK(x_j))` reproduces every coefficient.
pub fn interaction_picture(op: &Cmpo) -> Result<DressedTensors> {
    let iv = op.interval();
    let probes: Vec<f64> =
        (0..8).map(|k| iv.x_minus() + iv.length() * (k as f64 + 0.5) / 8.0).collect();
    let mut constants = Vec::new();
    for (name, f) in [("Q", op.q()), ("L", op.l()), ("R", op.r()), ("T", op.t())] {
        let first = f.evaluate(probes[0])?;
        for &x in &probes[1..] {
            let dev = f.evaluate(x)?.sub_mat(&first)?.norm_fro();
            if dev > 1e-12 * first.norm_fro().max(1.0) {
                return Err(Error::Domain(format!(
                    "{name} varies across the interval; the interaction picture needs bulk-uniform tensors"
                )));
            }
        }
        constants.push(first);
    }
    let q0 = constants[0].clone();
    let cfg = PropagatorConfig::default();
    let line = path_ordered_exp(op.q(), iv.x_minus(), iv.x_plus(), &cfg)?;
    let boundary = line.mul_mat(op.boundary())?;
    let dress = |k: &CMatrix| MatrixFn::conj_by_exp(iv, q0.clone(), iv.x_minus(), k.clone());
    Ok(DressedTensors {
        boundary,
        k_l: dress(&constants[1])?,
        k_r: dress(&constants[2])?,
        k_a: dress(&constants[3])?,
    })
}
