//! Truncated continuum Fock states on ordered-simplex grids, and direct
//! application of operators to them through their coefficient kernels.
//!
//! A `SectorState` tabulates the sector amplitudes `c_j(x_1 < ... < x_j)`
//! at midpoint nodes, `j <= j_max`. Applying an operator evaluates, for
//! every output tuple, the sum over insertion patterns: `A` channels pair
//! an output point with an input particle at exactly the same node (the
//! pairing is exact, never quadrature-smeared), `L` channels create fresh
//! output points, and `R` channels integrate over input positions with
//! midpoint weights.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmpo::Cmpo;
use crate::cmps::Cmps;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Interval, MatrixFn};
use crate::propagator::{path_ordered_exp_rmul, PropagatorConfig};

/// Desk-scale default sector cutoff.
pub const DEFAULT_J_MAX: usize = 3;
/// Desk-scale default node count per axis.
pub const DEFAULT_NODES_PER_AXIS: usize = 32;

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// All size-`k` index combinations from `0..n`, lexicographic.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(n, k));
    let mut cur: Vec<usize> = (0..k).collect();
    if k == 0 {
        out.push(Vec::new());
        return out;
    }
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + n - k {
                break;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Lexicographic rank of a sorted combination from `0..n`.
fn rank(tuple: &[usize], n: usize) -> usize {
    let k = tuple.len();
    let mut acc = 0;
    let mut start = 0;
    for (i, &c) in tuple.iter().enumerate() {
        for v in start..c {
            acc += binomial(n - 1 - v, k - 1 - i);
        }
        start = c + 1;
    }
    acc
}

/// Sector amplitude tables on the ordered-simplex midpoint grid.
#[derive(Clone, Debug)]
pub struct SectorState {
    interval: Interval,
    j_max: usize,
    nodes_per_axis: usize,
    sectors: Vec<Vec<C64>>,
}

/// Output of [`truncated_apply`]: the truncated image plus the quadrature
/// weight of the first discarded sector.
#[derive(Clone, Debug)]
pub struct AppliedSector {
    pub state: SectorState,
    /// Norm-squared of the `(j_max + 1)`-sector of the image; the leading
    /// truncation loss.
    pub leakage: f64,
}

impl SectorState {
    pub fn vacuum(interval: Interval, j_max: usize, nodes_per_axis: usize) -> Result<Self> {
        if nodes_per_axis == 0 {
            return Err(Error::Validation("need at least one node per axis".into()));
        }
        if j_max + 1 > nodes_per_axis {
            return Err(Error::Validation(format!(
                "sector cutoff {j_max} needs more than {nodes_per_axis} nodes per axis"
            )));
        }
        let sectors = (0..=j_max)
            .map(|j| vec![C64::new(0.0, 0.0); binomial(nodes_per_axis, j)])
            .collect::<Vec<_>>();
        let mut s = SectorState { interval, j_max, nodes_per_axis, sectors };
        s.sectors[0][0] = C64::new(1.0, 0.0);
        Ok(s)
    }

    /// Tabulate the coefficients of a state on the grid.
    pub fn from_cmps(
        state: &Cmps,
        j_max: usize,
        nodes_per_axis: usize,
        cfg: &PropagatorConfig,
    ) -> Result<Self> {
        let mut out = SectorState::vacuum(state.interval(), j_max, nodes_per_axis)?;
        let cache = NodeCache::build(state.q(), state.interval(), &out.nodes(), cfg)?;
        let l_at: Vec<CMatrix> = out
            .nodes()
            .iter()
            .map(|&x| state.l().evaluate(x))
            .collect::<Result<Vec<_>>>()?;
        out.sectors[0][0] = state.coefficient_with(&[], cfg)?;
        for j in 1..=j_max {
            let tuples = combinations(nodes_per_axis, j);
            let amps: Vec<C64> = tuples
                .par_iter()
                .map(|tuple| {
                    let inserts: Vec<(usize, &CMatrix)> =
                        tuple.iter().map(|&a| (a, &l_at[a])).collect();
                    cache.chain(state.boundary(), &inserts)
                })
                .collect();
            out.sectors[j] = amps;
        }
        Ok(out)
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    /// Midpoint nodes along one axis.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.nodes_per_axis)
            .map(|a| self.interval.x_minus() + (a as f64 + 0.5) * h)
            .collect()
    }

    pub fn spacing(&self) -> f64 {
        self.interval.length() / self.nodes_per_axis as f64
    }

    pub fn sector(&self, j: usize) -> Result<&[C64]> {
        self.sectors
            .get(j)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Domain(format!("sector {j} beyond the cutoff {}", self.j_max)))
    }

    pub fn amplitude(&self, tuple: &[usize]) -> Result<C64> {
        let j = tuple.len();
        let table = self.sector(j)?;
        if tuple.windows(2).any(|w| w[0] >= w[1])
            || tuple.iter().any(|&a| a >= self.nodes_per_axis)
        {
            return Err(Error::Domain("node tuple must be strictly increasing".into()));
        }
        Ok(table[rank(tuple, self.nodes_per_axis)])
    }

    pub fn set_amplitude(&mut self, tuple: &[usize], value: C64) -> Result<()> {
        let n = self.nodes_per_axis;
        let j = tuple.len();
        self.sector(j)?;
        if tuple.windows(2).any(|w| w[0] >= w[1]) || tuple.iter().any(|&a| a >= n) {
            return Err(Error::Domain("node tuple must be strictly increasing".into()));
        }
        let r = rank(tuple, n);
        self.sectors[j][r] = value;
        Ok(())
    }

    /// Quadrature norm-squared: `sum_j h^j sum |c_j|^2`.
    pub fn norm_sq(&self) -> f64 {
        let h = self.spacing();
        self.sectors
            .iter()
            .enumerate()
            .map(|(j, table)| {
                h.powi(j as i32) * table.iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .sum()
    }

    /// Largest amplitude difference across all sectors.
    pub fn max_abs_diff(&self, other: &SectorState) -> Result<f64> {
        if self.j_max != other.j_max
            || self.nodes_per_axis != other.nodes_per_axis
            || self.interval != other.interval
        {
            return Err(Error::Dimension("sector grids are incompatible".into()));
        }
        let mut worst = 0.0f64;
        for (a, b) in self.sectors.iter().zip(&other.sectors) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).norm());
            }
        }
        Ok(worst)
    }
}

/// Cumulative right-flow propagators at the grid nodes, shared by every
/// coefficient evaluation on the grid.
struct NodeCache {
    u: Vec<CMatrix>,
    u_inv: Vec<CMatrix>,
    u_full: CMatrix,
    boundary_dim: usize,
}

impl NodeCache {
    fn build(
        q: &MatrixFn,
        interval: Interval,
        nodes: &[f64],
        cfg: &PropagatorConfig,
    ) -> Result<NodeCache> {
        let mut u = Vec::with_capacity(nodes.len());
        let mut prev_x = interval.x_minus();
        let mut acc = CMatrix::identity(q.dim());
        for &x in nodes {
            acc = acc.mul_mat(&path_ordered_exp_rmul(q, prev_x, x, cfg)?)?;
            u.push(acc.clone());
            prev_x = x;
        }
        let u_full = acc.mul_mat(&path_ordered_exp_rmul(q, prev_x, interval.x_plus(), cfg)?)?;
        let u_inv = u.iter().map(CMatrix::inverse).collect::<Result<Vec<_>>>()?;
        Ok(NodeCache { u, u_inv, u_full, boundary_dim: q.dim() })
    }

    /// Trace of the alternating chain with insertions at the given nodes.
    fn chain(&self, boundary: &CMatrix, inserts: &[(usize, &CMatrix)]) -> C64 {
        let mut m = boundary.clone();
        let mut prev: Option<usize> = None;
        for &(a, k) in inserts {
            m = match prev {
                None => m.mul_mat(&self.u[a]),
                Some(p) => m.mul_mat(&self.u_inv[p]).and_then(|t| t.mul_mat(&self.u[a])),
            }
            .expect("cached propagator shapes agree");
            m = m.mul_mat(k).expect("insertion shapes agree");
            prev = Some(a);
        }
        m = match prev {
            None => m.mul_mat(&self.u_full),
            Some(p) => m.mul_mat(&self.u_inv[p]).and_then(|t| t.mul_mat(&self.u_full)),
        }
        .expect("cached propagator shapes agree");
        debug_assert_eq!(m.rows(), self.boundary_dim);
        m.trace()
    }
}

/// Apply an operator to a truncated state by direct evaluation of its
/// coefficient kernels; sectors beyond the input cutoff are discarded and
/// the weight of the first discarded sector is reported as leakage.
pub fn truncated_apply(op: &Cmpo, input: &SectorState, cfg: &PropagatorConfig) -> Result<AppliedSector> {
    if op.interval() != input.interval() {
        return Err(Error::Domain("operator and state intervals differ".into()));
    }
    let m_nodes = input.nodes_per_axis;
    let nodes = input.nodes();
    let h = input.spacing();
    let cache = NodeCache::build(op.q(), op.interval(), &nodes, cfg)?;
    let eval_all = |f: &MatrixFn| -> Result<Vec<CMatrix>> {
        nodes.iter().map(|&x| f.evaluate(x)).collect()
    };
    let k_l = eval_all(op.l())?;
    let k_r = eval_all(op.r())?;
    let k_a = eval_all(op.t())?;
    let l_zero = k_l.iter().all(CMatrix::is_zero);
    let r_zero = k_r.iter().all(CMatrix::is_zero);
    let sector_zero: Vec<bool> =
        input.sectors.iter().map(|t| t.iter().all(|z| z.re == 0.0 && z.im == 0.0)).collect();

    let amplitude_for = |out_tuple: &[usize]| -> C64 {
        let p = out_tuple.len();
        let complement: Vec<usize> =
            (0..m_nodes).filter(|a| !out_tuple.contains(a)).collect();
        let mut acc = C64::new(0.0, 0.0);
        for mask in 0..(1usize << p) {
            let paired: Vec<usize> =
                (0..p).filter(|i| mask >> i & 1 == 1).map(|i| out_tuple[i]).collect();
            if p > paired.len() && l_zero {
                continue;
            }
            if paired.len() > input.j_max {
                continue; // the input state carries no such sector
            }
            let r_cap = input.j_max - paired.len();
            for r in 0..=r_cap {
                if r > 0 && r_zero {
                    break;
                }
                let in_sector = paired.len() + r;
                if sector_zero[in_sector] {
                    continue;
                }
                for w in combinations(complement.len(), r) {
                    let removed: Vec<usize> = w.iter().map(|&i| complement[i]).collect();
                    // input tuple: paired points plus integrated points
                    let mut in_tuple: Vec<usize> =
                        paired.iter().chain(&removed).copied().collect();
                    in_tuple.sort_unstable();
                    let c_in = input.sectors[in_sector][rank(&in_tuple, m_nodes)];
                    if c_in.re == 0.0 && c_in.im == 0.0 {
                        continue;
                    }
                    // merged insertion chain, ascending in position
                    let mut inserts: Vec<(usize, &CMatrix)> = Vec::with_capacity(p + r);
                    for (i, &a) in out_tuple.iter().enumerate() {
                        let k = if mask >> i & 1 == 1 { &k_a[a] } else { &k_l[a] };
                        inserts.push((a, k));
                    }
                    for &a in &removed {
                        inserts.push((a, &k_r[a]));
                    }
                    inserts.sort_unstable_by_key(|&(a, _)| a);
                    let coeff = cache.chain(op.boundary(), &inserts);
                    acc += coeff * c_in * C64::new(h.powi(r as i32), 0.0);
                }
            }
        }
        acc
    };

    let mut out = SectorState::vacuum(input.interval, input.j_max, m_nodes)?;
    for p in 0..=input.j_max {
        let tuples = combinations(m_nodes, p);
        out.sectors[p] = tuples.par_iter().map(|t| amplitude_for(t)).collect();
    }
    let overflow = combinations(m_nodes, input.j_max + 1);
    let overflow_weights: Vec<f64> = overflow
        .par_iter()
        .map(|t| amplitude_for(t).norm_sqr() * h.powi((input.j_max + 1) as i32))
        .collect();
    // sequential reduction keeps the reported leakage bit-stable
    let leakage: f64 = overflow_weights.iter().sum();
    Ok(AppliedSector { state: out, leakage })
}

/// Multiply each sector-`N` amplitude at nodes `x_1 < ... < x_N` by the
/// alternating string phase `exp(-i w sum_j x_j (-1)^{N-j})`.
pub fn string_phase_apply(input: &SectorState, omega: f64) -> SectorState {
    let nodes = input.nodes();
    let mut out = input.clone();
    for j in 1..=input.j_max {
        let tuples = combinations(input.nodes_per_axis, j);
        for (idx, tuple) in tuples.iter().enumerate() {
            let mut acc = 0.0;
            for (pos, &a) in tuple.iter().enumerate() {
                let sign = if (j - 1 - pos).is_multiple_of(2) { 1.0 } else { -1.0 };
                acc += sign * nodes[a];
            }
            out.sectors[j][idx] *= C64::new(0.0, -omega * acc).exp();
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct SectorStateWire {
    interval: Interval,
    j_max: usize,
    nodes_per_axis: usize,
    sectors: Vec<Vec<[f64; 2]>>,
}

impl Serialize for SectorState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SectorStateWire {
            interval: self.interval,
            j_max: self.j_max,
            nodes_per_axis: self.nodes_per_axis,
            sectors: self
                .sectors
                .iter()
                .map(|t| t.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SectorState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = SectorStateWire::deserialize(d)?;
        let mut state = SectorState::vacuum(wire.interval, wire.j_max, wire.nodes_per_axis)
            .map_err(D::Error::custom)?;
        if wire.sectors.len() != state.sectors.len() {
            return Err(D::Error::custom("sector count mismatch"));
        }
        for (j, table) in wire.sectors.iter().enumerate() {
            if table.len() != state.sectors[j].len() {
                return Err(D::Error::custom(format!("sector {j} table length mismatch")));
            }
            state.sectors[j] = table.iter().map(|&[re, im]| C64::new(re, im)).collect();
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build, parity_phase_expected, CmpuFamily};
    use crate::linalg::integrate_scalar;

    fn dom() -> Interval {
        Interval::new(-0.5, 0.5).unwrap()
    }

    fn cfg() -> PropagatorConfig {
        PropagatorConfig::default()
    }

    #[test]
    fn combination_ranks_are_consistent() {
        for (n, k) in [(6usize, 2usize), (8, 3), (5, 1), (7, 0)] {
            let all = combinations(n, k);
            assert_eq!(all.len(), binomial(n, k));
            for (i, t) in all.iter().enumerate() {
                assert_eq!(rank(t, n), i, "tuple {t:?}");
            }
        }
    }

    #[test]
    fn from_cmps_tabulates_mode_amplitudes() {
        let iv = dom();
        let f = MatrixFn::from_scalar_samples(iv, 65, |x| C64::new(1.0 + 0.4 * x, 0.2 * x))
            .unwrap();
        let built = Cmps::fock(1, &f, iv).unwrap();
        let s = SectorState::from_cmps(&built.state, 2, 16, &cfg()).unwrap();
        let scale = 1.0 / built.mode_norm_sq.sqrt();
        let nodes = s.nodes();
        for (a, &x) in nodes.iter().enumerate() {
            let got = s.amplitude(&[a]).unwrap();
            let want = f.evaluate_scalar(x).unwrap() * scale;
            assert!((got - want).norm() < 1e-10);
        }
        assert!(s.amplitude(&[]).unwrap().norm() < 1e-12);
        assert!(s.amplitude(&[1, 5]).unwrap().norm() < 1e-12);
        // one-particle norm: sum h |f|^2 ~ midpoint rule
        assert!((s.norm_sq() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn identity_apply_is_exact() {
        let iv = dom();
        let id = build(&CmpuFamily::Identity, iv).unwrap();
        let state = Cmps::fock(2, &MatrixFn::scalar(iv, C64::new(1.0, 0.0)), iv)
            .unwrap()
            .state;
        let s = SectorState::from_cmps(&state, 3, 24, &cfg()).unwrap();
        let applied = truncated_apply(&id, &s, &cfg()).unwrap();
        assert!(applied.state.max_abs_diff(&s).unwrap() <= 1e-6);
        assert!(applied.leakage < 1e-12);
    }

    #[test]
    fn number_controlled_phase_acts_on_one_sector() {
        let iv = dom();
        let theta = 0.9;
        let u = build(&CmpuFamily::NumberControlledPhase { bond_dim: 3, theta }, iv).unwrap();
        // state populating sectors 0..2
        let one = Cmps::fock(1, &MatrixFn::scalar(iv, C64::new(1.0, 0.0)), iv).unwrap().state;
        let two = Cmps::fock(2, &MatrixFn::scalar(iv, C64::new(1.0, 0.0)), iv).unwrap().state;
        let vac = Cmps::vacuum(iv);
        let mix = Cmps::superpose(&[
            (C64::new(0.5, 0.0), &vac),
            (C64::new(0.7, 0.0), &one),
            (C64::new(0.3, 0.0), &two),
        ])
        .unwrap();
        let s = SectorState::from_cmps(&mix, 2, 16, &cfg()).unwrap();
        let applied = truncated_apply(&u, &s, &cfg()).unwrap().state;
        let phase = C64::new(0.0, theta).exp();
        for j in 0..=2usize {
            let want_factor = if j == 1 { phase } else { C64::new(1.0, 0.0) };
            for (a, b) in s.sectors[j].iter().zip(&applied.sectors[j]) {
                assert!((b - a * want_factor).norm() < 1e-9, "sector {j}");
            }
        }
    }

    #[test]
    fn displacement_on_vacuum_gives_coherent_amplitudes() {
        let iv = dom();
        let alpha =
            MatrixFn::from_scalar_samples(iv, 65, |x| C64::new(0.4 + 0.2 * x, 0.1)).unwrap();
        let d = build(&CmpuFamily::Displacement { alpha: alpha.clone() }, iv).unwrap();
        let vacuum = SectorState::vacuum(iv, 3, 16).unwrap();
        let applied = truncated_apply(&d, &vacuum, &cfg()).unwrap();
        let norm_sq = integrate_scalar(
            &MatrixFn::abs_sq(alpha.clone()).unwrap(),
            iv.x_minus(),
            iv.x_plus(),
            1e-13,
        )
        .unwrap()
        .re;
        let weight = (-0.5 * norm_sq).exp();
        let nodes = applied.state.nodes();
        for tuple in [vec![], vec![3], vec![1, 9], vec![0, 7, 13]] {
            let got = applied.state.amplitude(&tuple).unwrap();
            let mut want = C64::new(weight, 0.0);
            for &a in &tuple {
                want *= alpha.evaluate_scalar(nodes[a]).unwrap();
            }
            let rel = (got - want).norm() / want.norm();
            assert!(rel <= 1e-5, "tuple {tuple:?}: rel {rel:e}");
        }
        assert!(applied.leakage > 0.0);
    }

    #[test]
    fn string_phase_examples() {
        let iv = dom();
        let omega = 1.3;
        let mut s = SectorState::vacuum(iv, 2, 8).unwrap();
        s.set_amplitude(&[2], C64::new(1.0, 0.0)).unwrap();
        s.set_amplitude(&[1, 5], C64::new(1.0, 0.0)).unwrap();
        let out = string_phase_apply(&s, omega);
        let nodes = s.nodes();
        assert_eq!(out.amplitude(&[]).unwrap(), C64::new(1.0, 0.0));
        let one = out.amplitude(&[2]).unwrap();
        assert!((one - C64::new(0.0, -omega * nodes[2]).exp()).norm() < 1e-14);
        let two = out.amplitude(&[1, 5]).unwrap();
        let want = C64::new(0.0, -omega * (nodes[5] - nodes[1])).exp();
        assert!((two - want).norm() < 1e-14);
    }

    #[test]
    fn parity_apply_matches_the_string_oracle() {
        let iv = dom();
        let omega = 1.0;
        let u = build(&CmpuFamily::ParityPhase { omega }, iv).unwrap();
        let state = Cmps::new(
            iv,
            crate::seeds::random_matrix(2, 4000, 1.0),
            MatrixFn::constant(iv, crate::seeds::random_matrix(2, 4001, 0.6)).unwrap(),
            MatrixFn::constant(iv, crate::seeds::random_matrix(2, 4002, 0.6)).unwrap(),
        )
        .unwrap();
        let s = SectorState::from_cmps(&state, 3, 12, &cfg()).unwrap();
        let direct = truncated_apply(&u, &s, &cfg()).unwrap();
        let via_string = string_phase_apply(&s, omega);
        let diff = direct.state.max_abs_diff(&via_string).unwrap();
        assert!(diff <= 1e-6, "string identity defect {diff:e}");
        assert!(direct.leakage <= 1e-12);
        // phases preserve the quadrature norm exactly
        assert!((direct.state.norm_sq() - s.norm_sq()).abs() < 1e-9);
    }

    #[test]
    fn string_phase_matches_parity_expected_formula() {
        let iv = dom();
        let omega = 2.3;
        let mut s = SectorState::vacuum(iv, 3, 10).unwrap();
        s.set_amplitude(&[0, 4, 7], C64::new(1.0, 0.0)).unwrap();
        let out = string_phase_apply(&s, omega);
        let nodes = s.nodes();
        let want = parity_phase_expected(&[nodes[0], nodes[4], nodes[7]], omega);
        assert!((out.amplitude(&[0, 4, 7]).unwrap() - want).norm() < 1e-14);
    }

    #[test]
    fn serde_round_trip() {
        let iv = dom();
        let mut s = SectorState::vacuum(iv, 2, 6).unwrap();
        s.set_amplitude(&[1, 3], C64::new(0.2, -0.4)).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: SectorState = serde_json::from_str(&text).unwrap();
        assert_eq!(back.amplitude(&[1, 3]).unwrap(), C64::new(0.2, -0.4));
        assert!(s.max_abs_diff(&back).unwrap() == 0.0);
    }
}
