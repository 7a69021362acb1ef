//! Continuous matrix product states: the `(interval, D, B, Q, L)` record,
//! sector coefficients, inner products, and canonical constructors.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::chain::{chain_trace, validate_points};
use crate::error::{Error, Result};
use crate::linalg::{integrate_scalar, su2_ladder, CMatrix, Interval, MatrixFn};
use crate::propagator::{path_ordered_exp_rmul, PropagatorConfig};

/// A bosonic state with bond dimension `D`, boundary matrix `B`, and
/// matrix functions `Q(x)`, `L(x)` on the interval. The `j`-particle
/// coefficient at ordered points `x_1 < ... < x_j` is
/// `Tr(B W(x_-, x_1) L(x_1) W(x_1, x_2) ... L(x_j) W(x_j, x_+))` with `W`
/// the free propagator generated by `Q`.
#[derive(Clone, Debug)]
pub struct Cmps {
    interval: Interval,
    dim: usize,
    boundary: CMatrix,
    q: MatrixFn,
    l: MatrixFn,
}

/// Result of building a normalized mode state: the state itself plus a
/// record of whether the supplied mode had to be rescaled to unit norm.
#[derive(Clone, Debug)]
pub struct FockBuild {
    pub state: Cmps,
    pub rescaled: bool,
    /// `\int |f|^2` of the supplied mode before any rescaling.
    pub mode_norm_sq: f64,
}

impl Cmps {
    pub fn new(interval: Interval, boundary: CMatrix, q: MatrixFn, l: MatrixFn) -> Result<Self> {
        let dim = boundary.rows();
        if !boundary.is_square() {
            return Err(Error::Dimension("boundary matrix must be square".into()));
        }
        if q.dim() != dim || l.dim() != dim {
            return Err(Error::Dimension(format!(
                "tensor dims (B {}, Q {}, L {}) disagree",
                dim,
                q.dim(),
                l.dim()
            )));
        }
        if q.domain() != interval || l.domain() != interval {
            return Err(Error::Domain("tensor domains must equal the state interval".into()));
        }
        Ok(Cmps { interval, dim, boundary, q, l })
    }

    /// The Fock vacuum: `D = 1`, `B = 1`, `Q = L = 0`.
    pub fn vacuum(interval: Interval) -> Self {
        Cmps {
            interval,
            dim: 1,
            boundary: CMatrix::identity(1),
            q: MatrixFn::zero(interval, 1),
            l: MatrixFn::zero(interval, 1),
        }
    }

    /// The normalized `n`-particle state in a single mode `f`:
    /// `D = n + 1`, `Q = 0`, `L = f(x) J^-`, `B = (n!)^{-3/2} (J^+)^n`.
    ///
    /// The mode is checked for unit norm by quadrature and rescaled when
    /// it misses by more than 1e-8; the build records both.
    pub fn fock(n: usize, mode: &MatrixFn, interval: Interval) -> Result<FockBuild> {
        if mode.dim() != 1 {
            return Err(Error::Dimension("mode must be a scalar function".into()));
        }
        if mode.domain() != interval {
            return Err(Error::Domain("mode domain must equal the state interval".into()));
        }
        let norm_sq_fn = MatrixFn::abs_sq(mode.clone())?;
        let norm_sq =
            integrate_scalar(&norm_sq_fn, interval.x_minus(), interval.x_plus(), 1e-12)?.re;
        if norm_sq <= 0.0 {
            return Err(Error::Validation("mode has vanishing norm".into()));
        }
        let rescaled = (norm_sq - 1.0).abs() > 1e-8;
        let mode = if rescaled {
            MatrixFn::scaled(C64::new(1.0 / norm_sq.sqrt(), 0.0), mode.clone())
        } else {
            mode.clone()
        };
        if n == 0 {
            return Ok(FockBuild { state: Cmps::vacuum(interval), rescaled, mode_norm_sq: norm_sq });
        }
        let dim = n + 1;
        let (jp, jm) = su2_ladder(dim)?;
        let factorial: f64 = (1..=n).map(|k| k as f64).product();
        let boundary = jp.pow(n)?.scale(C64::new(factorial.powf(-1.5), 0.0));
        let l = MatrixFn::kron_fn(mode, MatrixFn::constant(interval, jm)?)?;
        let state = Cmps::new(interval, boundary, MatrixFn::zero(interval, dim), l)?;
        Ok(FockBuild { state, rescaled, mode_norm_sq: norm_sq })
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

    /// Sector coefficient at strictly increasing points (empty for the
    /// vacuum sector).
    pub fn coefficient(&self, xs: &[f64]) -> Result<C64> {
        self.coefficient_with(xs, &PropagatorConfig::default())
    }

    pub fn coefficient_with(&self, xs: &[f64], cfg: &PropagatorConfig) -> Result<C64> {
        validate_points(xs, self.interval)?;
        chain_trace(&self.boundary, &self.q, xs, |_, x| self.l.evaluate(x), self.interval, cfg)
    }

    /// `<self|other>` via the doubled generator
    /// `E = conj(Q_1) ⊗ 1 + 1 ⊗ Q_2 + conj(L_1) ⊗ L_2`, which resums the
    /// sector integrals in closed form.
    pub fn inner_product(&self, other: &Cmps) -> Result<C64> {
        self.inner_product_with(other, &PropagatorConfig::default())
    }

    pub fn inner_product_with(&self, other: &Cmps, cfg: &PropagatorConfig) -> Result<C64> {
        if self.interval != other.interval {
            return Err(Error::Domain("inner product needs matching intervals".into()));
        }
        let e = self.doubled_generator(other)?;
        let w = path_ordered_exp_rmul(&e, self.interval.x_minus(), self.interval.x_plus(), cfg)?;
        let b = crate::linalg::kron(&self.boundary.conj(), &other.boundary);
        Ok(b.mul_mat(&w)?.trace())
    }

    fn doubled_generator(&self, other: &Cmps) -> Result<MatrixFn> {
        let iv = self.interval;
        let id1 = MatrixFn::identity(iv, self.dim);
        let id2 = MatrixFn::identity(iv, other.dim);
        MatrixFn::sum(vec![
            MatrixFn::kron_fn(MatrixFn::conj_fn(self.q.clone()), id2.clone())?,
            MatrixFn::kron_fn(id1, other.q.clone())?,
            MatrixFn::kron_fn(MatrixFn::conj_fn(self.l.clone()), other.l.clone())?,
        ])
    }

    pub fn norm(&self) -> Result<f64> {
        Ok(self.inner_product(self)?.re.max(0.0).sqrt())
    }

    /// Rescale the boundary by `1 / sqrt(<self|self>)`. Normalization is
    /// never applied implicitly elsewhere.
    pub fn normalized(&self) -> Result<Cmps> {
        let n = self.norm()?;
        if n == 0.0 {
            return Err(Error::Validation("cannot normalize a null state".into()));
        }
        let mut out = self.clone();
        out.boundary = out.boundary.scale(C64::new(1.0 / n, 0.0));
        Ok(out)
    }

    /// Weighted superposition as a direct sum of the constituent tensors,
    /// with the weights absorbed into the boundary blocks.
    pub fn superpose(terms: &[(C64, &Cmps)]) -> Result<Cmps> {
        let (_, first) = terms.first().ok_or_else(|| Error::Validation("empty superposition".into()))?;
        let interval = first.interval;
        let mut boundary = CMatrix::zeros(0, 0);
        let mut qs = Vec::with_capacity(terms.len());
        let mut ls = Vec::with_capacity(terms.len());
        for (w, s) in terms {
            if s.interval != interval {
                return Err(Error::Domain("superposition needs matching intervals".into()));
            }
            boundary = boundary.direct_sum(&s.boundary.scale(*w));
            qs.push(s.q.clone());
            ls.push(s.l.clone());
        }
        Cmps::new(interval, boundary, MatrixFn::direct_sum(qs)?, MatrixFn::direct_sum(ls)?)
    }
}

#[derive(Serialize, Deserialize)]
struct CmpsWire {
    interval: Interval,
    #[serde(rename = "D")]
    dim: usize,
    #[serde(rename = "B")]
    boundary: CMatrix,
    #[serde(rename = "Q")]
    q: MatrixFn,
    #[serde(rename = "L")]
    l: MatrixFn,
}

impl Serialize for Cmps {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CmpsWire {
            interval: self.interval,
            dim: self.dim,
            boundary: self.boundary.clone(),
            q: self.q.clone(),
            l: self.l.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Cmps {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = CmpsWire::deserialize(d)?;
        let state =
            Cmps::new(wire.interval, wire.boundary, wire.q, wire.l).map_err(D::Error::custom)?;
        if state.dim() != wire.dim {
            return Err(D::Error::custom("declared D disagrees with tensor shapes"));
        }
        Ok(state)
    }
}
