//! Constructors for the named unitary families, plus the closed-form
//! phase oracles the tests compare them against.
//!
//! Conventions fixed here once and used everywhere: the free generator of
//! a phase family is anti-Hermitian (`Q = i diag(q)` with real `q`), and
//! the parity family multiplies the sector-`N` amplitude at
//! `x_1 < ... < x_N` by `exp(-i w sum_j x_j (-1)^{N-j})` in absolute
//! coordinates. The boundary carries the interval-length compensation
//! that makes this hold on any interval.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cmpo::Cmpo;
use crate::cmps::Cmps;
use crate::error::{Error, Result};
use crate::linalg::{integrate_scalar, CMatrix, Interval, MatrixFn};
use crate::propagator::{path_ordered_exp_rmul, PropagatorConfig};

/// One phased block of the multi-sector family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectorPhase {
    /// Shift-block size `d >= 2`; the phase lands on the `(d-1)`-particle sector.
    pub block_dim: usize,
    pub theta: f64,
}

/// Parameter record for every buildable unitary family.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CmpuFamily {
    /// The identity: `D = 1`, `B = T = 1`, `Q = L = R = 0`.
    Identity,
    /// Coherent displacement with amplitude `alpha(x)`.
    Displacement { alpha: MatrixFn },
    /// Diagonal phase family: `Q = i diag(q)`, `T = e^{i diag(t)} P`,
    /// boundary `V(x_+, x_-) |k)(+|`.
    PermutationPhase {
        qs: Vec<MatrixFn>,
        ts: Vec<MatrixFn>,
        perm: Vec<usize>,
        k: usize,
    },
    /// The `D = 2` string-phase family with frequency `omega`.
    ParityPhase { omega: f64 },
    /// Phase `e^{i theta}` on the `(bond_dim - 2)`-particle sector.
    NumberControlledPhase { bond_dim: usize, theta: f64 },
    /// Independent phases on several sectors via a direct sum of
    /// shift blocks of pairwise distinct sizes.
    MultiSectorPhase { sectors: Vec<SectorPhase> },
    /// Displacement composed after a permutation-phase unitary.
    DisplacedPhase {
        alpha: MatrixFn,
        qs: Vec<MatrixFn>,
        ts: Vec<MatrixFn>,
        perm: Vec<usize>,
        k: usize,
    },
    /// `1 + sum_j (e^{i a_j} - 1) |psi_j><psi_j|` over pairwise
    /// orthonormal states.
    SubspaceUnitary { states: Vec<Cmps>, phases: Vec<f64> },
    /// Swaps the vacuum with the one-particle state of the given mode.
    SwapVacuumOneParticle { mode: MatrixFn },
}

fn rank_one(dim: usize, k: usize, weights: &[C64]) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for (c, &w) in weights.iter().enumerate() {
        m[(k, c)] = w;
    }
    m
}

/// Raising shift block `N` with `N[(a+1, a)] = 1`.
fn shift_up(dim: usize) -> CMatrix {
    let mut n = CMatrix::zeros(dim, dim);
    for a in 0..dim - 1 {
        n[(a + 1, a)] = C64::new(1.0, 0.0);
    }
    n
}

fn check_real_profiles(fs: &[MatrixFn], what: &str) -> Result<()> {
    for f in fs {
        if !f.is_real_on_samples(16, 1e-9)? {
            return Err(Error::Validation(format!("{what} profiles must be real-valued")));
        }
    }
    Ok(())
}

fn identity_cmpo(interval: Interval) -> Cmpo {
    Cmpo::new(
        interval,
        CMatrix::identity(1),
        MatrixFn::zero(interval, 1),
        MatrixFn::zero(interval, 1),
        MatrixFn::zero(interval, 1),
        MatrixFn::identity(interval, 1),
    )
    .expect("scalar identity tensors")
}

fn displacement_cmpo(interval: Interval, alpha: &MatrixFn) -> Result<Cmpo> {
    if alpha.dim() != 1 {
        return Err(Error::Dimension("displacement amplitude must be scalar".into()));
    }
    if alpha.domain() != interval {
        return Err(Error::Domain("displacement amplitude domain mismatch".into()));
    }
    let q = MatrixFn::scaled(C64::new(-0.5, 0.0), MatrixFn::abs_sq(alpha.clone())?);
    let r = MatrixFn::scaled(C64::new(-1.0, 0.0), MatrixFn::conj_fn(alpha.clone()));
    Cmpo::new(
        interval,
        CMatrix::identity(1),
        q,
        alpha.clone(),
        r,
        MatrixFn::identity(interval, 1),
    )
}

fn permutation_phase_cmpo(
    interval: Interval,
    qs: &[MatrixFn],
    ts: &[MatrixFn],
    perm: &[usize],
    k: usize,
    plus_weights: Option<Vec<C64>>,
) -> Result<Cmpo> {
    let dim = qs.len();
    if dim == 0 || ts.len() != dim || perm.len() != dim {
        return Err(Error::Validation("q, t, and perm must share one length".into()));
    }
    if k >= dim {
        return Err(Error::Validation(format!("boundary index k = {k} outside 0..{dim}")));
    }
    check_real_profiles(qs, "q")?;
    check_real_profiles(ts, "t")?;
    let q = MatrixFn::diag_imag(qs.to_vec())?;
    let t = MatrixFn::phase_diag_perm(ts.to_vec(), perm.to_vec())?;
    let line = path_ordered_exp_rmul(
        &q,
        interval.x_minus(),
        interval.x_plus(),
        &PropagatorConfig::default(),
    )?;
    let weights = plus_weights.unwrap_or_else(|| vec![C64::new(1.0, 0.0); dim]);
    let boundary = line.inverse()?.mul_mat(&rank_one(dim, k, &weights))?;
    Cmpo::new(
        interval,
        boundary,
        q,
        MatrixFn::zero(interval, dim),
        MatrixFn::zero(interval, dim),
        t,
    )
}

fn parity_phase_cmpo(interval: Interval, omega: f64) -> Result<Cmpo> {
    let qs = vec![
        MatrixFn::scalar(interval, C64::new(omega / 2.0, 0.0)),
        MatrixFn::scalar(interval, C64::new(-omega / 2.0, 0.0)),
    ];
    let ts = vec![MatrixFn::scalar(interval, C64::new(0.0, 0.0)); 2];
    // the second boundary weight pins the string phases to absolute
    // coordinates: odd sectors would otherwise pick up e^{i w x_-}
    let weights = vec![C64::new(1.0, 0.0), (C64::new(0.0, -omega * interval.x_minus())).exp()];
    permutation_phase_cmpo(interval, &qs, &ts, &[1, 0], 0, Some(weights))
}

fn sector_blocks_cmpo(interval: Interval, sectors: &[SectorPhase]) -> Result<Cmpo> {
    if sectors.is_empty() {
        return Err(Error::Validation("need at least one phased sector".into()));
    }
    for s in sectors {
        if s.block_dim < 2 {
            return Err(Error::Validation("sector blocks need dimension >= 2".into()));
        }
    }
    for (i, a) in sectors.iter().enumerate() {
        for b in &sectors[i + 1..] {
            if a.block_dim == b.block_dim {
                return Err(Error::Validation(
                    "sector blocks must have pairwise distinct sizes".into(),
                ));
            }
        }
    }
    let mut boundary = CMatrix::identity(1);
    let mut t = CMatrix::identity(1);
    for s in sectors {
        let d = s.block_dim;
        let phase = C64::new(0.0, s.theta).exp() - C64::new(1.0, 0.0);
        let mut corner = CMatrix::zeros(d, d);
        corner[(0, d - 1)] = phase;
        boundary = boundary.direct_sum(&corner);
        t = t.direct_sum(&shift_up(d));
    }
    let dim = boundary.rows();
    Cmpo::new(
        interval,
        boundary,
        MatrixFn::zero(interval, dim),
        MatrixFn::zero(interval, dim),
        MatrixFn::zero(interval, dim),
        MatrixFn::constant(interval, t)?,
    )
}

fn subspace_unitary_cmpo(interval: Interval, states: &[Cmps], phases: &[f64]) -> Result<Cmpo> {
    if states.is_empty() || states.len() != phases.len() {
        return Err(Error::Validation("need one phase per subspace state".into()));
    }
    for (i, a) in states.iter().enumerate() {
        if a.interval() != interval {
            return Err(Error::Domain("subspace state interval mismatch".into()));
        }
        for (j, b) in states.iter().enumerate() {
            let ip = a.inner_product(b)?;
            let want = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            if (ip - want).norm() > 1e-8 {
                return Err(Error::Validation(format!(
                    "subspace states are not orthonormal: <{i}|{j}> = {ip}"
                )));
            }
        }
    }
    let id = identity_cmpo(interval);
    let projectors: Vec<Cmpo> = states
        .iter()
        .map(|s| Cmpo::projector(s, s))
        .collect::<Result<Vec<_>>>()?;
    let mut terms: Vec<(C64, &Cmpo)> = vec![(C64::new(1.0, 0.0), &id)];
    for (p, &a) in projectors.iter().zip(phases) {
        terms.push((C64::new(0.0, a).exp() - C64::new(1.0, 0.0), p));
    }
    Cmpo::lincomb(&terms)
}

fn swap_vacuum_cmpo(interval: Interval, mode: &MatrixFn) -> Result<Cmpo> {
    let one = Cmps::fock(1, mode, interval)?.state;
    let vac = Cmps::vacuum(interval);
    let w = C64::new(1.0 / 2.0f64.sqrt(), 0.0);
    let minus = Cmps::superpose(&[(w, &vac), (-w, &one)])?;
    let p = Cmpo::projector(&minus, &minus)?;
    let id = identity_cmpo(interval);
    Cmpo::lincomb(&[(C64::new(1.0, 0.0), &id), (C64::new(-2.0, 0.0), &p)])
}

/// Build the operator for a family on the given interval.
pub fn build(family: &CmpuFamily, interval: Interval) -> Result<Cmpo> {
    match family {
        CmpuFamily::Identity => Ok(identity_cmpo(interval)),
        CmpuFamily::Displacement { alpha } => displacement_cmpo(interval, alpha),
        CmpuFamily::PermutationPhase { qs, ts, perm, k } => {
            permutation_phase_cmpo(interval, qs, ts, perm, *k, None)
        }
        CmpuFamily::ParityPhase { omega } => parity_phase_cmpo(interval, *omega),
        CmpuFamily::NumberControlledPhase { bond_dim, theta } => {
            if *bond_dim < 3 {
                return Err(Error::Validation(
                    "number-controlled phase needs bond dimension >= 3".into(),
                ));
            }
            sector_blocks_cmpo(
                interval,
                &[SectorPhase { block_dim: bond_dim - 1, theta: *theta }],
            )
        }
        CmpuFamily::MultiSectorPhase { sectors } => sector_blocks_cmpo(interval, sectors),
        CmpuFamily::DisplacedPhase { alpha, qs, ts, perm, k } => {
            let d = displacement_cmpo(interval, alpha)?;
            let u = permutation_phase_cmpo(interval, qs, ts, perm, *k, None)?;
            d.compose(&u)
        }
        CmpuFamily::SubspaceUnitary { states, phases } => {
            subspace_unitary_cmpo(interval, states, phases)
        }
        CmpuFamily::SwapVacuumOneParticle { mode } => swap_vacuum_cmpo(interval, mode),
    }
}

/// String phase of the parity family on the sector with ordered points
/// `xs`: `exp(-i w sum_j x_j (-1)^{N-j})`, and 1 on the vacuum sector.
pub fn parity_phase_expected(xs: &[f64], omega: f64) -> C64 {
    let n = xs.len();
    let mut acc = 0.0;
    for (j, &x) in xs.iter().enumerate() {
        let sign = if (n - 1 - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        acc += sign * x;
    }
    C64::new(0.0, -omega * acc).exp()
}

/// Closed-form phase of a permutation-phase unitary, evaluated by chasing
/// the single boundary index through the diagonal segments and the
/// permutation steps. Independent of the matrix chain machinery.
pub fn permutation_phase_expected(
    qs: &[MatrixFn],
    ts: &[MatrixFn],
    perm: &[usize],
    k: usize,
    xs: &[f64],
    interval: Interval,
) -> Result<C64> {
    let dim = qs.len();
    if ts.len() != dim || perm.len() != dim || k >= dim {
        return Err(Error::Validation("inconsistent family parameters".into()));
    }
    let q_int = |s: usize, a: f64, b: f64| -> Result<f64> {
        Ok(integrate_scalar(&qs[s], a, b, 1e-12)?.re)
    };
    // walk the chain from the right: the boundary contributes the
    // reversed full line of the starting index
    let mut state = k;
    let mut phase = -q_int(state, interval.x_minus(), interval.x_plus())?;
    let mut upper = interval.x_plus();
    for &x in xs.iter().rev() {
        phase += q_int(state, x, upper)?;
        state = perm[state];
        phase += ts[state].evaluate_scalar(x)?.re;
        upper = x;
    }
    phase += q_int(state, interval.x_minus(), upper)?;
    Ok(C64::new(0.0, phase).exp())
}
