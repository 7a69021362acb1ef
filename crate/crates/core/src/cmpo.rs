//! Continuous matrix product operators: the `(interval, D, B, Q, L, R, T)`
//! record, Fock-representation coefficients, and the operator algebra
//! (composition, adjoint, application to states, gauge transforms,
//! projectors between states, and boundary-weighted linear combinations).
//!
//! A coefficient probe selects one insertion matrix per point:
//! `K^L = L(x)` (create on the left), `K^R = R(x)` (annihilate on the
//! right), `K^A = T(x)` (both sides at the same point), and the amplitude
//! is `Tr(B W(x_-, x_1) K^{a_1}(x_1) ... K^{a_j}(x_j) W(x_j, x_+))` with
//! the free propagator `W` generated by `Q`, laid out left to right in
//! increasing position.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::chain::{chain_trace, validate_points};
use crate::cmps::Cmps;
use crate::error::{Error, Result};
use crate::linalg::{kron, mat_exp, nilpotent_power_table, CMatrix, Interval, MatrixFn};
use crate::propagator::PropagatorConfig;

/// Insertion channel selector for coefficient probes.
#[derive(Copy, Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum CoeffLabel {
    L,
    R,
    A,
}

impl CoeffLabel {
    /// Exchange the left/right channels; fixes `A`.
    pub fn swapped(self) -> CoeffLabel {
        match self {
            CoeffLabel::L => CoeffLabel::R,
            CoeffLabel::R => CoeffLabel::L,
            CoeffLabel::A => CoeffLabel::A,
        }
    }

    pub fn parse_string(s: &str) -> Result<Vec<CoeffLabel>> {
        s.chars()
            .map(|c| match c {
                'L' => Ok(CoeffLabel::L),
                'R' => Ok(CoeffLabel::R),
                'A' => Ok(CoeffLabel::A),
                other => Err(Error::Validation(format!("unknown label character {other:?}"))),
            })
            .collect()
    }
}

impl fmt::Display for CoeffLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoeffLabel::L => write!(f, "L"),
            CoeffLabel::R => write!(f, "R"),
            CoeffLabel::A => write!(f, "A"),
        }
    }
}

impl FromStr for CoeffLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" => Ok(CoeffLabel::L),
            "R" => Ok(CoeffLabel::R),
            "A" => Ok(CoeffLabel::A),
            other => Err(Error::Validation(format!("unknown label {other:?}"))),
        }
    }
}

/// Continuous matrix product operator.
#[derive(Clone, Debug)]
pub struct Cmpo {
    interval: Interval,
    dim: usize,
    boundary: CMatrix,
    q: MatrixFn,
    l: MatrixFn,
    r: MatrixFn,
    t: MatrixFn,
}

impl Cmpo {
    pub fn new(
        interval: Interval,
        boundary: CMatrix,
        q: MatrixFn,
        l: MatrixFn,
        r: MatrixFn,
        t: MatrixFn,
    ) -> Result<Self> {
        let dim = boundary.rows();
        if !boundary.is_square() {
            return Err(Error::Dimension("boundary matrix must be square".into()));
        }
        for (name, f) in [("Q", &q), ("L", &l), ("R", &r), ("T", &t)] {
            if f.dim() != dim {
                return Err(Error::Dimension(format!(
                    "{name} has dim {} but the boundary is {dim}x{dim}",
                    f.dim()
                )));
            }
            if f.domain() != interval {
                return Err(Error::Domain(format!("{name} domain differs from the interval")));
            }
        }
        Ok(Cmpo { interval, dim, boundary, q, l, r, t })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boundary(&self) -> &CMatrix {
        &self.boundary
    }

    pub fn q(&self) -> &MatrixFn {
        &self.q
    }

    pub fn l(&self) -> &MatrixFn {
        &self.l
    }

    pub fn r(&self) -> &MatrixFn {
        &self.r
    }

    pub fn t(&self) -> &MatrixFn {
        &self.t
    }

    fn insertion(&self, label: CoeffLabel, x: f64) -> Result<CMatrix> {
        match label {
            CoeffLabel::L => self.l.evaluate(x),
            CoeffLabel::R => self.r.evaluate(x),
            CoeffLabel::A => self.t.evaluate(x),
        }
    }

    /// Fock-representation coefficient for the given label string at
    /// strictly increasing points.
    pub fn coefficient(&self, labels: &[CoeffLabel], xs: &[f64]) -> Result<C64> {
        self.coefficient_with(labels, xs, &PropagatorConfig::default())
    }

    pub fn coefficient_with(
        &self,
        labels: &[CoeffLabel],
        xs: &[f64],
        cfg: &PropagatorConfig,
    ) -> Result<C64> {
        if labels.len() != xs.len() {
            return Err(Error::Domain(format!(
                "{} labels for {} points",
                labels.len(),
                xs.len()
            )));
        }
        validate_points(xs, self.interval)?;
        chain_trace(
            &self.boundary,
            &self.q,
            xs,
            |i, x| self.insertion(labels[i], x),
            self.interval,
            cfg,
        )
    }

    /// Operator product `self · other`: `self` is applied after `other`.
    /// The product rule is asymmetric, so the order matters:
    /// `Q = Q_1 ⊗ 1 + 1 ⊗ Q_2 + R_1 ⊗ L_2`, `L = L_1 ⊗ 1 + T_1 ⊗ L_2`,
    /// `R = 1 ⊗ R_2 + R_1 ⊗ T_2`, `T = T_1 ⊗ T_2`, `B = B_1 ⊗ B_2`
    /// with index 1 for `self` and 2 for `other`.
    pub fn compose(&self, other: &Cmpo) -> Result<Cmpo> {
        if self.interval != other.interval {
            return Err(Error::Domain("composition needs matching intervals".into()));
        }
        let iv = self.interval;
        let id1 = MatrixFn::identity(iv, self.dim);
        let id2 = MatrixFn::identity(iv, other.dim);
        let q = MatrixFn::sum(vec![
            MatrixFn::kron_fn(self.q.clone(), id2.clone())?,
            MatrixFn::kron_fn(id1.clone(), other.q.clone())?,
            MatrixFn::kron_fn(self.r.clone(), other.l.clone())?,
        ])?;
        let l = MatrixFn::sum(vec![
            MatrixFn::kron_fn(self.l.clone(), id2.clone())?,
            MatrixFn::kron_fn(self.t.clone(), other.l.clone())?,
        ])?;
        let r = MatrixFn::sum(vec![
            MatrixFn::kron_fn(id1, other.r.clone())?,
            MatrixFn::kron_fn(self.r.clone(), other.t.clone())?,
        ])?;
        let t = MatrixFn::kron_fn(self.t.clone(), other.t.clone())?;
        Cmpo::new(iv, kron(&self.boundary, &other.boundary), q, l, r, t)
    }

    /// Hermitian adjoint: conjugate every tensor and swap the left/right
    /// channels, so that
    /// `coeff(O†, labels, xs) = conj(coeff(O, swapped labels, xs))`.
    pub fn adjoint(&self) -> Cmpo {
        Cmpo {
            interval: self.interval,
            dim: self.dim,
            boundary: self.boundary.conj(),
            q: MatrixFn::conj_fn(self.q.clone()),
            l: MatrixFn::conj_fn(self.r.clone()),
            r: MatrixFn::conj_fn(self.l.clone()),
            t: MatrixFn::conj_fn(self.t.clone()),
        }
    }

    /// View a state as an operator acting on the vacuum: same `B`, `Q`,
    /// `L`, with `R = 0` and `T = 1`.
    pub fn embed_cmps(state: &Cmps) -> Cmpo {
        let iv = state.interval();
        Cmpo {
            interval: iv,
            dim: state.dim(),
            boundary: state.boundary().clone(),
            q: state.q().clone(),
            l: state.l().clone(),
            r: MatrixFn::zero(iv, state.dim()),
            t: MatrixFn::identity(iv, state.dim()),
        }
    }

    /// Apply the operator to a state; the result has bond dimension
    /// `D_O * D_psi` and tensors
    /// `B = B_1 ⊗ B_2`, `Q = Q_1 ⊗ 1 + 1 ⊗ Q_2 + R_1 ⊗ L_2`,
    /// `L = L_1 ⊗ 1 + T_1 ⊗ L_2`.
    pub fn apply(&self, state: &Cmps) -> Result<Cmps> {
        if self.interval != state.interval() {
            return Err(Error::Domain("application needs matching intervals".into()));
        }
        let iv = self.interval;
        let id1 = MatrixFn::identity(iv, self.dim);
        let id2 = MatrixFn::identity(iv, state.dim());
        let q = MatrixFn::sum(vec![
            MatrixFn::kron_fn(self.q.clone(), id2.clone())?,
            MatrixFn::kron_fn(id1, state.q().clone())?,
            MatrixFn::kron_fn(self.r.clone(), state.l().clone())?,
        ])?;
        let l = MatrixFn::sum(vec![
            MatrixFn::kron_fn(self.l.clone(), id2)?,
            MatrixFn::kron_fn(self.t.clone(), state.l().clone())?,
        ])?;
        Cmps::new(iv, kron(&self.boundary, state.boundary()), q, l)
    }

    /// Gauge-equivalent operator under an invertible `g(x)` with
    /// caller-supplied derivative `dg`:
    /// `Q -> g Q g^{-1} - dg g^{-1}`, `K -> g K g^{-1}` for `L`, `R`, `T`,
    /// and `B -> g(x_+) B g(x_-)^{-1}`. All coefficients are invariant.
    ///
    /// `g` must be invertible on the whole interval; singularity is
    /// detected (as a domain error) only at the seventeen spot-checked
    /// points, and `dg` is checked against finite differences at five.
    pub fn gauge_transform(&self, g: &MatrixFn, dg: &MatrixFn) -> Result<Cmpo> {
        if g.dim() != self.dim || dg.dim() != self.dim {
            return Err(Error::Dimension("gauge dimension must match the bond dimension".into()));
        }
        if g.domain() != self.interval || dg.domain() != self.interval {
            return Err(Error::Domain("gauge domain must equal the interval".into()));
        }
        let iv = self.interval;
        // invertibility spot checks, endpoints included
        for k in 0..17 {
            let x = iv.x_minus() + iv.length() * k as f64 / 16.0;
            let m = g.evaluate(x)?;
            let det = m.det().map_err(|_| {
                Error::Domain(format!("gauge matrix singular at x = {x}"))
            })?;
            if det.norm() < 1e-12 {
                return Err(Error::Domain(format!("gauge matrix singular at x = {x}")));
            }
        }
        // derivative consistency at five interior points
        let delta = iv.length() * 1e-6;
        for k in 1..=5 {
            let x = iv.x_minus() + iv.length() * k as f64 / 6.0;
            let fd = g
                .evaluate(x + delta)?
                .sub_mat(&g.evaluate(x - delta)?)?
                .scale(C64::new(1.0 / (2.0 * delta), 0.0));
            let stated = dg.evaluate(x)?;
            let defect = fd.sub_mat(&stated)?.norm_fro() / stated.norm_fro().max(1.0);
            if defect > 1e-4 {
                return Err(Error::Validation(format!(
                    "dg disagrees with finite differences at x = {x} (defect {defect:e})"
                )));
            }
        }
        let q = MatrixFn::sum(vec![
            MatrixFn::gauge_conj(g.clone(), self.q.clone())?,
            MatrixFn::scaled(C64::new(-1.0, 0.0), MatrixFn::gauge_deriv(g.clone(), dg.clone())?),
        ])?;
        let boundary = g
            .evaluate(iv.x_plus())?
            .mul_mat(&self.boundary)?
            .mul_mat(&g.evaluate(iv.x_minus())?.inverse()?)?;
        Cmpo::new(
            iv,
            boundary,
            q,
            MatrixFn::gauge_conj(g.clone(), self.l.clone())?,
            MatrixFn::gauge_conj(g.clone(), self.r.clone())?,
            MatrixFn::gauge_conj(g.clone(), self.t.clone())?,
        )
    }

    /// The rank-one operator `|ket><bra|` between two states:
    /// `B = B_i ⊗ conj(B_j)`, `Q = Q_i ⊗ 1 + 1 ⊗ conj(Q_j)`,
    /// `L = L_i ⊗ 1`, `R = 1 ⊗ conj(L_j)`, `T = 0`.
    pub fn projector(ket: &Cmps, bra: &Cmps) -> Result<Cmpo> {
        if ket.interval() != bra.interval() {
            return Err(Error::Domain("projector needs matching intervals".into()));
        }
        let iv = ket.interval();
        let id1 = MatrixFn::identity(iv, ket.dim());
        let id2 = MatrixFn::identity(iv, bra.dim());
        let q = MatrixFn::sum(vec![
            MatrixFn::kron_fn(ket.q().clone(), id2.clone())?,
            MatrixFn::kron_fn(id1.clone(), MatrixFn::conj_fn(bra.q().clone()))?,
        ])?;
        let l = MatrixFn::kron_fn(ket.l().clone(), id2)?;
        let r = MatrixFn::kron_fn(id1, MatrixFn::conj_fn(bra.l().clone()))?;
        let dim = ket.dim() * bra.dim();
        Cmpo::new(
            iv,
            kron(ket.boundary(), &bra.boundary().conj()),
            q,
            l,
            r,
            MatrixFn::zero(iv, dim),
        )
    }

    /// Boundary-weighted direct sum: coefficients are the weighted sums of
    /// the terms' coefficients, and the result stays a single operator.
    pub fn lincomb(terms: &[(C64, &Cmpo)]) -> Result<Cmpo> {
        let (_, first) =
            terms.first().ok_or_else(|| Error::Domain("empty linear combination".into()))?;
        let interval = first.interval;
        let mut boundary = CMatrix::zeros(0, 0);
        let mut qs = Vec::new();
        let mut ls = Vec::new();
        let mut rs = Vec::new();
        let mut ts = Vec::new();
        for (w, o) in terms {
            if o.interval != interval {
                return Err(Error::Domain("linear combination needs matching intervals".into()));
            }
            boundary = boundary.direct_sum(&o.boundary.scale(*w));
            qs.push(o.q.clone());
            ls.push(o.l.clone());
            rs.push(o.r.clone());
            ts.push(o.t.clone());
        }
        Cmpo::new(
            interval,
            boundary,
            MatrixFn::direct_sum(qs)?,
            MatrixFn::direct_sum(ls)?,
            MatrixFn::direct_sum(rs)?,
            MatrixFn::direct_sum(ts)?,
        )
    }

    /// True when all four tensors folded to constants.
    pub fn is_bulk_uniform(&self) -> bool {
        [&self.q, &self.l, &self.r, &self.t].iter().all(|f| f.constant_value().is_some())
    }
}

#[derive(Serialize, Deserialize)]
struct CmpoWire {
    interval: Interval,
    #[serde(rename = "D")]
    dim: usize,
    #[serde(rename = "B")]
    boundary: CMatrix,
    #[serde(rename = "Q")]
    q: MatrixFn,
    #[serde(rename = "L")]
    l: MatrixFn,
    #[serde(rename = "R")]
    r: MatrixFn,
    #[serde(rename = "T")]
    t: MatrixFn,
}

impl Serialize for Cmpo {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CmpoWire {
            interval: self.interval,
            dim: self.dim,
            boundary: self.boundary.clone(),
            q: self.q.clone(),
            l: self.l.clone(),
            r: self.r.clone(),
            t: self.t.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Cmpo {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = CmpoWire::deserialize(d)?;
        let op = Cmpo::new(wire.interval, wire.boundary, wire.q, wire.l, wire.r, wire.t)
            .map_err(D::Error::custom)?;
        if op.dim() != wire.dim {
            return Err(D::Error::custom("declared D disagrees with tensor shapes"));
        }
        Ok(op)
    }
}

// ---------------------------------------------------------------------
// Fast batch evaluation
// ---------------------------------------------------------------------

struct SparseMat {
    cols: usize,
    nz: Vec<(usize, usize, C64)>,
}

impl SparseMat {
    fn from_dense(m: &CMatrix) -> SparseMat {
        let mut nz = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let z = m[(i, j)];
                if z.re != 0.0 || z.im != 0.0 {
                    nz.push((i, j, z));
                }
            }
        }
        SparseMat { cols: m.cols(), nz }
    }

    /// Compute `m · self`.
    fn right_mul(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(m.rows(), self.cols);
        for &(r, c, v) in &self.nz {
            for i in 0..m.rows() {
                let a = m[(i, r)];
                if a.re != 0.0 || a.im != 0.0 {
                    out[(i, c)] += a * v;
                }
            }
        }
        out
    }
}

enum Applier {
    Sparse(SparseMat),
    Dense(CMatrix),
}

impl Applier {
    fn from(m: &CMatrix) -> Applier {
        let sp = SparseMat::from_dense(m);
        if sp.nz.len() * 4 <= m.rows() * m.cols() {
            Applier::Sparse(sp)
        } else {
            Applier::Dense(m.clone())
        }
    }

    fn right_mul(&self, m: &CMatrix) -> CMatrix {
        match self {
            Applier::Sparse(sp) => sp.right_mul(m),
            Applier::Dense(d) => m.mul_mat(d).expect("shapes fixed at engine build"),
        }
    }
}

enum SegmentExp {
    /// Exactly diagonal generator: segment propagator scales columns.
    Diagonal(Vec<C64>),
    /// Nilpotent generator: terminated power table `Q^k / k!` (k >= 1).
    Nilpotent(Vec<Applier>),
    /// General constant generator: dense exponential per segment.
    Plain(CMatrix),
}

struct FastConst {
    exp: SegmentExp,
    k_by_label: [Applier; 3],
}

/// Batch evaluator for coefficient probes against one operator.
///
/// For bulk-uniform operators the free segments reduce to exponentials of
/// one constant generator; diagonal and nilpotent generators (every named
/// unitary family, and their two-sided products) avoid dense exponentials
/// entirely.
pub struct CoeffEngine<'a> {
    cmpo: &'a Cmpo,
    cfg: PropagatorConfig,
    fast: Option<FastConst>,
}

impl<'a> CoeffEngine<'a> {
    pub fn new(cmpo: &'a Cmpo, cfg: PropagatorConfig) -> CoeffEngine<'a> {
        let fast = match (
            cmpo.q.constant_value(),
            cmpo.l.constant_value(),
            cmpo.r.constant_value(),
            cmpo.t.constant_value(),
        ) {
            (Some(q), Some(l), Some(r), Some(t)) => {
                let diag_ok = (0..q.rows()).all(|i| {
                    (0..q.cols()).all(|j| {
                        i == j || (q[(i, j)].re == 0.0 && q[(i, j)].im == 0.0)
                    })
                });
                let exp = if diag_ok {
                    SegmentExp::Diagonal((0..q.rows()).map(|i| q[(i, i)]).collect())
                } else if let Some(table) = nilpotent_power_table(q) {
                    SegmentExp::Nilpotent(table[1..].iter().map(Applier::from).collect())
                } else {
                    SegmentExp::Plain(q.clone())
                };
                Some(FastConst {
                    exp,
                    k_by_label: [Applier::from(l), Applier::from(r), Applier::from(t)],
                })
            }
            _ => None,
        };
        CoeffEngine { cmpo, cfg, fast }
    }

    fn advance(&self, m: CMatrix, delta: f64, fast: &FastConst) -> CMatrix {
        if delta == 0.0 {
            return m;
        }
        match &fast.exp {
            SegmentExp::Diagonal(diag) => {
                let mut out = m;
                for c in 0..diag.len() {
                    let factor = (diag[c] * delta).exp();
                    for i in 0..out.rows() {
                        out[(i, c)] *= factor;
                    }
                }
                out
            }
            SegmentExp::Nilpotent(powers) => {
                let mut out = m.clone();
                let mut weight = C64::new(1.0, 0.0);
                for p in powers {
                    weight *= C64::new(delta, 0.0);
                    out = out.add_mat(&p.right_mul(&m).scale(weight)).expect("shape");
                }
                out
            }
            SegmentExp::Plain(q) => {
                let e = mat_exp(&q.scale(C64::new(delta, 0.0))).expect("square");
                m.mul_mat(&e).expect("shape")
            }
        }
    }

    pub fn coefficient(&self, labels: &[CoeffLabel], xs: &[f64]) -> Result<C64> {
        let Some(fast) = &self.fast else {
            return self.cmpo.coefficient_with(labels, xs, &self.cfg);
        };
        if labels.len() != xs.len() {
            return Err(Error::Domain(format!(
                "{} labels for {} points",
                labels.len(),
                xs.len()
            )));
        }
        validate_points(xs, self.cmpo.interval)?;
        let mut m = self.cmpo.boundary.clone();
        let mut prev = self.cmpo.interval.x_minus();
        for (label, &x) in labels.iter().zip(xs) {
            m = self.advance(m, x - prev, fast);
            let k = &fast.k_by_label[match label {
                CoeffLabel::L => 0,
                CoeffLabel::R => 1,
                CoeffLabel::A => 2,
            }];
            m = k.right_mul(&m);
            prev = x;
        }
        m = self.advance(m, self.cmpo.interval.x_plus() - prev, fast);
        Ok(m.trace())
    }
}
