//! Dense lattice discretizations with first-order tensor scalings.
//!
//! An operator on `N` sites of spacing `eps` carries per-site tensors
//! `A^{00} = 1 + eps Q(x_k)`, `A^{10} = sqrt(eps) L(x_k)`,
//! `A^{01} = sqrt(eps) R(x_k)`, `A^{11} = T(x_k)` at the site midpoints;
//! higher transfer tensors are the symmetrized products fixed by the
//! continuum limit, `A^{ij} = eps^{(n_l+n_r)/2} / n! * sum over orderings
//! of n_l copies of L, n_r of R, and min(i,j) of T`. Site bases use the
//! ladder matrices of the `(n_max+1)`-dimensional representation, so
//! occupation matrix elements carry the ladder factors `c(i)`.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::cmpo::{Cmpo, CoeffLabel};
use crate::cmps::Cmps;
use crate::error::{Error, Result};
use crate::linalg::{kron, CMatrix, Interval};

/// What the site tensors encode.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum LatticeKind {
    Mpo,
    Mps,
}

/// Per-site transfer tensors of a discretized operator or state.
#[derive(Clone, Debug)]
pub struct LatticeSystem {
    interval: Interval,
    n_sites: usize,
    epsilon: f64,
    n_max: usize,
    bond_dim: usize,
    kind: LatticeKind,
    boundary: CMatrix,
    /// Per site: `(n_max+1)^2` tensors `A^{ij}` for operators (row-major
    /// in `(i, j)`), `n_max+1` tensors `A^i` for states.
    site_tensors: Vec<Vec<CMatrix>>,
}

/// Ladder factor `c(i)` with `(J^+)^i |0> = c(i) |i>` in the
/// `(n_max+1)`-dimensional representation.
fn ladder_factor(n_max: usize, i: usize) -> f64 {
    (0..i).map(|r| ((n_max - r) as f64 * (r + 1) as f64).sqrt()).product()
}

/// Distinct orderings of the multiset with `counts[s]` copies of symbol `s`.
fn multiset_orderings(counts: [usize; 3]) -> Vec<Vec<usize>> {
    let total: usize = counts.iter().sum();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(total);
    fn rec(counts: &mut [usize; 3], cur: &mut Vec<usize>, total: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == total {
            out.push(cur.clone());
            return;
        }
        for s in 0..3 {
            if counts[s] > 0 {
                counts[s] -= 1;
                cur.push(s);
                rec(counts, cur, total, out);
                cur.pop();
                counts[s] += 1;
            }
        }
    }
    let mut c = counts;
    rec(&mut c, &mut cur, total, &mut out);
    out
}

fn site_positions(interval: Interval, n_sites: usize) -> (f64, Vec<f64>) {
    let eps = interval.length() / n_sites as f64;
    let xs = (0..n_sites)
        .map(|k| interval.x_minus() + (k as f64 + 0.5) * eps)
        .collect();
    (eps, xs)
}

impl LatticeSystem {
    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    /// Operator tensor `A^{ij}` at a site.
    pub fn op_tensor(&self, site: usize, i: usize, j: usize) -> Result<&CMatrix> {
        if self.kind != LatticeKind::Mpo {
            return Err(Error::Domain("not an operator lattice".into()));
        }
        self.site_tensors
            .get(site)
            .and_then(|t| t.get(i * (self.n_max + 1) + j))
            .ok_or_else(|| Error::Domain("tensor index out of range".into()))
    }

    /// State tensor `A^i` at a site.
    pub fn state_tensor(&self, site: usize, i: usize) -> Result<&CMatrix> {
        if self.kind != LatticeKind::Mps {
            return Err(Error::Domain("not a state lattice".into()));
        }
        self.site_tensors
            .get(site)
            .and_then(|t| t.get(i))
            .ok_or_else(|| Error::Domain("tensor index out of range".into()))
    }

    fn site_of(&self, x: f64) -> Result<usize> {
        if !self.interval.contains(x) {
            return Err(Error::Domain(format!("probe point {x} outside the interval")));
        }
        let k = ((x - self.interval.x_minus()) / self.epsilon) as usize;
        Ok(k.min(self.n_sites - 1))
    }

    /// Occupation matrix element of the lattice operator between
    /// single-particle patterns given by the labels, rescaled to continuum
    /// normalization: each L/R divides by `sqrt(eps)` and every ladder
    /// factor is removed.
    pub fn matrix_element(&self, labels: &[CoeffLabel], xs: &[f64]) -> Result<C64> {
        if self.kind != LatticeKind::Mpo {
            return Err(Error::Domain("matrix elements need an operator lattice".into()));
        }
        if labels.len() != xs.len() {
            return Err(Error::Domain("labels and points must pair up".into()));
        }
        let mut sites: Vec<(usize, CoeffLabel)> = Vec::with_capacity(xs.len());
        for (&x, &l) in xs.iter().zip(labels) {
            sites.push((self.site_of(x)?, l));
        }
        if sites.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Domain(
                "probe points must map to distinct, increasing lattice sites".into(),
            ));
        }
        let c1 = ladder_factor(self.n_max, 1);
        let mut m = self.boundary.clone();
        let mut scale = 1.0f64;
        let mut cursor = 0usize;
        for k in 0..self.n_sites {
            let (i, j) = if cursor < sites.len() && sites[cursor].0 == k {
                let label = sites[cursor].1;
                cursor += 1;
                match label {
                    CoeffLabel::L => {
                        scale *= self.epsilon.sqrt() * c1;
                        (1, 0)
                    }
                    CoeffLabel::R => {
                        scale *= self.epsilon.sqrt() * c1;
                        (0, 1)
                    }
                    CoeffLabel::A => {
                        scale *= c1 * c1;
                        (1, 1)
                    }
                }
            } else {
                (0, 0)
            };
            m = m.mul_mat(self.op_tensor(k, i, j)?)?;
        }
        Ok(m.trace() * C64::new(1.0 / scale, 0.0))
    }

    /// Occupation amplitude of the lattice state with one particle at each
    /// probe point, rescaled to continuum normalization.
    pub fn state_coefficient(&self, xs: &[f64]) -> Result<C64> {
        if self.kind != LatticeKind::Mps {
            return Err(Error::Domain("state coefficients need a state lattice".into()));
        }
        let mut sites = Vec::with_capacity(xs.len());
        for &x in xs {
            sites.push(self.site_of(x)?);
        }
        if sites.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "probe points must map to distinct, increasing lattice sites".into(),
            ));
        }
        let c1 = ladder_factor(self.n_max, 1);
        let mut m = self.boundary.clone();
        let mut scale = 1.0f64;
        let mut cursor = 0usize;
        for k in 0..self.n_sites {
            let i = if cursor < sites.len() && sites[cursor] == k {
                cursor += 1;
                scale *= self.epsilon.sqrt() * c1;
                1
            } else {
                0
            };
            m = m.mul_mat(self.state_tensor(k, i)?)?;
        }
        Ok(m.trace() * C64::new(1.0 / scale, 0.0))
    }
}

/// Discretize an operator onto `n_sites` sites with per-site boson cutoff
/// `n_max`.
pub fn discretize(op: &Cmpo, n_sites: usize, n_max: usize) -> Result<LatticeSystem> {
    if n_sites < 2 || n_max < 1 {
        return Err(Error::Validation("need n_sites >= 2 and n_max >= 1".into()));
    }
    let (eps, xs) = site_positions(op.interval(), n_sites);
    let dim = op.dim();
    let id = CMatrix::identity(dim);
    let mut site_tensors = Vec::with_capacity(n_sites);
    for &x in &xs {
        let q = op.q().evaluate(x)?;
        let parts = [op.l().evaluate(x)?, op.r().evaluate(x)?, op.t().evaluate(x)?];
        let mut tensors = Vec::with_capacity((n_max + 1) * (n_max + 1));
        for i in 0..=n_max {
            for j in 0..=n_max {
                let a = if i == 0 && j == 0 {
                    id.add_mat(&q.scale(C64::new(eps, 0.0)))?
                } else {
                    let paired = i.min(j);
                    let counts = [i - paired, j - paired, paired];
                    let n_total: usize = counts.iter().sum();
                    let mut acc = CMatrix::zeros(dim, dim);
                    for ordering in multiset_orderings(counts) {
                        let mut prod = CMatrix::identity(dim);
                        for s in ordering {
                            prod = prod.mul_mat(&parts[s])?;
                        }
                        acc = acc.add_mat(&prod)?;
                    }
                    let factorial: f64 = (1..=n_total).map(|v| v as f64).product();
                    let power = eps.powf(0.5 * (counts[0] + counts[1]) as f64);
                    acc.scale(C64::new(power / factorial, 0.0))
                };
                tensors.push(a);
            }
        }
        site_tensors.push(tensors);
    }
    Ok(LatticeSystem {
        interval: op.interval(),
        n_sites,
        epsilon: eps,
        n_max,
        bond_dim: dim,
        kind: LatticeKind::Mpo,
        boundary: op.boundary().clone(),
        site_tensors,
    })
}

/// Discretize a state: `A^0 = 1 + eps Q`, `A^i = eps^{i/2} L^i / i!`.
pub fn discretize_cmps(state: &Cmps, n_sites: usize, n_max: usize) -> Result<LatticeSystem> {
    if n_sites < 2 || n_max < 1 {
        return Err(Error::Validation("need n_sites >= 2 and n_max >= 1".into()));
    }
    let (eps, xs) = site_positions(state.interval(), n_sites);
    let dim = state.dim();
    let id = CMatrix::identity(dim);
    let mut site_tensors = Vec::with_capacity(n_sites);
    for &x in &xs {
        let q = state.q().evaluate(x)?;
        let l = state.l().evaluate(x)?;
        let mut tensors = Vec::with_capacity(n_max + 1);
        tensors.push(id.add_mat(&q.scale(C64::new(eps, 0.0)))?);
        for i in 1..=n_max {
            let factorial: f64 = (1..=i).map(|v| v as f64).product();
            tensors.push(
                l.pow(i)?.scale(C64::new(eps.powf(0.5 * i as f64) / factorial, 0.0)),
            );
        }
        site_tensors.push(tensors);
    }
    Ok(LatticeSystem {
        interval: state.interval(),
        n_sites,
        epsilon: eps,
        n_max,
        bond_dim: dim,
        kind: LatticeKind::Mps,
        boundary: state.boundary().clone(),
        site_tensors,
    })
}

/// Contract all site tensors into a dense operator (or amplitude vector)
/// on the truncated occupation basis, sites ordered left to right.
pub fn dense_assemble(sys: &LatticeSystem) -> Result<CMatrix> {
    let local = sys.n_max + 1;
    let dim_u128 = (local as u128).pow(sys.n_sites as u32);
    let guard = 1u128 << 20;
    let entries = match sys.kind {
        LatticeKind::Mps => dim_u128,
        LatticeKind::Mpo => dim_u128.saturating_mul(dim_u128),
    };
    if dim_u128 > guard || entries > guard {
        return Err(Error::Capacity(format!(
            "dense assembly of {entries} entries exceeds the 2^20 guard"
        )));
    }
    let dim = dim_u128 as usize;
    let digits = |mut v: usize| -> Vec<usize> {
        let mut d = vec![0usize; sys.n_sites];
        for k in (0..sys.n_sites).rev() {
            d[k] = v % local;
            v /= local;
        }
        d
    };
    match sys.kind {
        LatticeKind::Mps => {
            let mut out = CMatrix::zeros(dim, 1);
            for row in 0..dim {
                let occ = digits(row);
                let mut m = sys.boundary.clone();
                let mut factor = 1.0;
                for (k, &i) in occ.iter().enumerate() {
                    m = m.mul_mat(sys.state_tensor(k, i)?)?;
                    factor *= ladder_factor(sys.n_max, i);
                }
                out[(row, 0)] = m.trace() * C64::new(factor, 0.0);
            }
            Ok(out)
        }
        LatticeKind::Mpo => {
            let mut out = CMatrix::zeros(dim, dim);
            for row in 0..dim {
                let bra = digits(row);
                for col in 0..dim {
                    let ket = digits(col);
                    let mut m = sys.boundary.clone();
                    let mut factor = 1.0;
                    for k in 0..sys.n_sites {
                        m = m.mul_mat(sys.op_tensor(k, bra[k], ket[k])?)?;
                        factor *=
                            ladder_factor(sys.n_max, bra[k]) * ladder_factor(sys.n_max, ket[k]);
                    }
                    out[(row, col)] = m.trace() * C64::new(factor, 0.0);
                }
            }
            Ok(out)
        }
    }
}

/// Matrix element of the lattice product `O_1 O_2` between occupation
/// patterns, contracted site by site without assembling either factor:
/// the product site tensor is `sum_p c(p)^2 A_1^{ip} ⊗ A_2^{pj}`.
pub fn product_element(
    sys1: &LatticeSystem,
    sys2: &LatticeSystem,
    labels: &[CoeffLabel],
    xs: &[f64],
) -> Result<C64> {
    if sys1.kind != LatticeKind::Mpo || sys2.kind != LatticeKind::Mpo {
        return Err(Error::Domain("product elements need operator lattices".into()));
    }
    if sys1.n_sites != sys2.n_sites || sys1.n_max != sys2.n_max || sys1.interval != sys2.interval
    {
        return Err(Error::Dimension("lattices must share geometry".into()));
    }
    if labels.len() != xs.len() {
        return Err(Error::Domain("labels and points must pair up".into()));
    }
    let mut sites: Vec<(usize, CoeffLabel)> = Vec::with_capacity(xs.len());
    for (&x, &l) in xs.iter().zip(labels) {
        sites.push((sys1.site_of(x)?, l));
    }
    if sites.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::Domain(
            "probe points must map to distinct, increasing lattice sites".into(),
        ));
    }
    let n_max = sys1.n_max;
    let c1 = ladder_factor(n_max, 1);
    let mut m = kron(&sys1.boundary, &sys2.boundary);
    let mut scale = 1.0f64;
    let mut cursor = 0usize;
    for k in 0..sys1.n_sites {
        let (i, j) = if cursor < sites.len() && sites[cursor].0 == k {
            let label = sites[cursor].1;
            cursor += 1;
            match label {
                CoeffLabel::L => {
                    scale *= sys1.epsilon.sqrt() * c1;
                    (1, 0)
                }
                CoeffLabel::R => {
                    scale *= sys1.epsilon.sqrt() * c1;
                    (0, 1)
                }
                CoeffLabel::A => {
                    scale *= c1 * c1;
                    (1, 1)
                }
            }
        } else {
            (0, 0)
        };
        let mut site = CMatrix::zeros(
            sys1.bond_dim * sys2.bond_dim,
            sys1.bond_dim * sys2.bond_dim,
        );
        for p in 0..=n_max {
            let cp = ladder_factor(n_max, p);
            let term = kron(sys1.op_tensor(k, i, p)?, sys2.op_tensor(k, p, j)?)
                .scale(C64::new(cp * cp, 0.0));
            site = site.add_mat(&term)?;
        }
        m = m.mul_mat(&site)?;
    }
    Ok(m.trace() * C64::new(1.0 / scale, 0.0))
}

/// One probe evaluated at one lattice size.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub probe_id: usize,
    pub n_sites: usize,
    pub epsilon: f64,
    pub lattice_re: f64,
    pub lattice_im: f64,
    pub continuum_re: f64,
    pub continuum_im: f64,
    pub abs_error: f64,
}

/// Lattice-versus-continuum table with per-probe fitted slopes.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln error` against `ln epsilon` per probe;
    /// `None` when the errors vanish identically ("exact").
    pub slopes: Vec<Option<f64>>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "probe_id,N,epsilon,lattice_value_re,lattice_value_im,continuum_re,continuum_im,abs_error,slope\n",
        );
        for row in &self.rows {
            let slope = match self.slopes[row.probe_id] {
                Some(s) => format!("{s:.11e}"),
                None => "exact".to_string(),
            };
            out.push_str(&format!(
                "{},{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{}\n",
                row.probe_id,
                row.n_sites,
                row.epsilon,
                row.lattice_re,
                row.lattice_im,
                row.continuum_re,
                row.continuum_im,
                row.abs_error,
                slope
            ));
        }
        out
    }
}

/// Compare lattice matrix elements against continuum coefficients over a
/// range of lattice sizes and fit the error decay per probe. Lattices use
/// the default per-site cutoff `n_max = 1`; the higher transfer tensors
/// carry no information for single-occupancy probes.
pub fn convergence_study(
    op: &Cmpo,
    probes: &[(Vec<CoeffLabel>, Vec<f64>)],
    ns: &[usize],
) -> Result<ConvergenceTable> {
    if ns.len() < 3 {
        return Err(Error::Domain("slope fits need at least three lattice sizes".into()));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("lattice sizes must be strictly increasing".into()));
    }
    let mut rows = Vec::new();
    let mut per_probe: Vec<Vec<(f64, f64)>> = vec![Vec::new(); probes.len()];
    for &n in ns {
        let sys = discretize(op, n, 1)?;
        for (probe_id, (labels, xs)) in probes.iter().enumerate() {
            let lattice = sys.matrix_element(labels, xs)?;
            let continuum = op.coefficient(labels, xs)?;
            let err = (lattice - continuum).norm();
            rows.push(ConvergenceRow {
                probe_id,
                n_sites: n,
                epsilon: sys.epsilon(),
                lattice_re: lattice.re,
                lattice_im: lattice.im,
                continuum_re: continuum.re,
                continuum_im: continuum.im,
                abs_error: err,
            });
            if err > 1e-15 {
                per_probe[probe_id].push((sys.epsilon().ln(), err.ln()));
            }
        }
    }
    let slopes = per_probe
        .iter()
        .map(|pts| {
            if pts.len() < 2 {
                return None;
            }
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let var: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
            Some(cov / var)
        })
        .collect();
    Ok(ConvergenceTable { rows, slopes })
}
