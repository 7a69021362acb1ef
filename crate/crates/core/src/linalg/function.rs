//! Intervals and matrix-valued functions on them.
//!
//! `MatrixFn` stores either a plain representation (constant, affine, or
//! an interpolated grid of samples) or a small expression tree of exact
//! pointwise combinations (sums, Kronecker products, conjugates, direct
//! sums, similarity transforms). Combinators fold to plain forms whenever
//! the operands allow, so tensor algebra on bulk-uniform objects stays
//! closed-form; everything else is evaluated lazily and exactly at each
//! requested point.

use num_complex::Complex64 as C64;
use serde::de::Error as _;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::matrix::{kron, mat_exp, CMatrix};

/// Closed interval `[x_minus, x_plus]` with positive length.
#[derive(Copy, Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Interval {
    x_minus: f64,
    x_plus: f64,
}

impl Interval {
    pub fn new(x_minus: f64, x_plus: f64) -> Result<Self> {
        if !x_minus.is_finite() || !x_plus.is_finite() {
            return Err(Error::Validation("interval endpoints must be finite".into()));
        }
        if x_minus >= x_plus {
            return Err(Error::Domain(format!(
                "interval needs x_minus < x_plus, got [{x_minus}, {x_plus}]"
            )));
        }
        Ok(Interval { x_minus, x_plus })
    }

    /// Symmetric interval of length `len` centered on the origin.
    pub fn centered(len: f64) -> Result<Self> {
        Interval::new(-len / 2.0, len / 2.0)
    }

    pub fn x_minus(&self) -> f64 {
        self.x_minus
    }

    pub fn x_plus(&self) -> f64 {
        self.x_plus
    }

    pub fn length(&self) -> f64 {
        self.x_plus - self.x_minus
    }

    pub fn contains(&self, x: f64) -> bool {
        let slack = 1e-12 * self.length();
        x >= self.x_minus - slack && x <= self.x_plus + slack
    }

    fn clamp(&self, x: f64) -> f64 {
        x.max(self.x_minus).min(self.x_plus)
    }
}

/// Interpolation order for grid samples.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum InterpOrder {
    /// Left-nearest sample (piecewise constant).
    Nearest,
    /// Piecewise linear.
    Linear,
    /// Not-a-knot cubic spline.
    Cubic,
}

impl InterpOrder {
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(InterpOrder::Nearest),
            1 => Ok(InterpOrder::Linear),
            3 => Ok(InterpOrder::Cubic),
            other => Err(Error::Validation(format!("interpolation order {other} not in {{0,1,3}}"))),
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            InterpOrder::Nearest => 0,
            InterpOrder::Linear => 1,
            InterpOrder::Cubic => 3,
        }
    }
}

/// Sampled matrix function with a fixed interpolation order.
#[derive(Clone, PartialEq, Debug)]
pub struct GridFn {
    points: Vec<f64>,
    values: Vec<CMatrix>,
    order: InterpOrder,
    /// Second derivatives of the spline at the sample points (cubic only).
    second: Vec<CMatrix>,
}

impl GridFn {
    fn new(points: Vec<f64>, values: Vec<CMatrix>, order: InterpOrder) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Dimension("grid points/values length mismatch".into()));
        }
        if points.is_empty() {
            return Err(Error::Validation("grid needs at least one sample".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("grid points must be strictly increasing".into()));
        }
        let dim = values[0].rows();
        if values.iter().any(|v| v.rows() != dim || v.cols() != dim) {
            return Err(Error::Dimension("grid values must share one square shape".into()));
        }
        let min_len = match order {
            InterpOrder::Nearest => 1,
            InterpOrder::Linear => 2,
            InterpOrder::Cubic => 4,
        };
        if points.len() < min_len {
            return Err(Error::Validation(format!(
                "order-{} interpolation needs at least {min_len} samples",
                order.code()
            )));
        }
        let second = if order == InterpOrder::Cubic {
            cubic_second_derivatives(&points, &values)
        } else {
            Vec::new()
        };
        Ok(GridFn { points, values, order, second })
    }

    fn dim(&self) -> usize {
        self.values[0].rows()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    pub fn order(&self) -> InterpOrder {
        self.order
    }

    fn map_values(&self, f: impl Fn(&CMatrix) -> CMatrix) -> GridFn {
        GridFn::new(self.points.clone(), self.values.iter().map(f).collect(), self.order)
            .expect("mapped grid keeps its shape")
    }

    fn same_layout(&self, other: &GridFn) -> bool {
        self.order == other.order && self.points == other.points
    }

    fn eval(&self, x: f64) -> CMatrix {
        let pts = &self.points;
        let n = pts.len();
        match self.order {
            InterpOrder::Nearest => {
                let idx = pts.partition_point(|&p| p <= x);
                self.values[idx.saturating_sub(1)].clone()
            }
            InterpOrder::Linear => {
                if x <= pts[0] {
                    return self.values[0].clone();
                }
                if x >= pts[n - 1] {
                    return self.values[n - 1].clone();
                }
                let i = pts.partition_point(|&p| p <= x) - 1;
                let t = (x - pts[i]) / (pts[i + 1] - pts[i]);
                self.values[i]
                    .scale(C64::new(1.0 - t, 0.0))
                    .add_mat(&self.values[i + 1].scale(C64::new(t, 0.0)))
                    .expect("grid value shapes agree")
            }
            InterpOrder::Cubic => {
                if x <= pts[0] {
                    return self.values[0].clone();
                }
                if x >= pts[n - 1] {
                    return self.values[n - 1].clone();
                }
                let i = pts.partition_point(|&p| p <= x) - 1;
                let h = pts[i + 1] - pts[i];
                let t = x - pts[i];
                let (y0, y1) = (&self.values[i], &self.values[i + 1]);
                let (m0, m1) = (&self.second[i], &self.second[i + 1]);
                // S = y0 + t*(dy/h - h(2 m0 + m1)/6) + t^2 m0/2 + t^3 (m1 - m0)/(6h)
                let mut acc = y0.clone();
                let lin = y1
                    .sub_mat(y0)
                    .unwrap()
                    .scale(C64::new(1.0 / h, 0.0))
                    .sub_mat(
                        &m0.scale(C64::new(2.0, 0.0))
                            .add_mat(m1)
                            .unwrap()
                            .scale(C64::new(h / 6.0, 0.0)),
                    )
                    .unwrap();
                acc = acc.add_mat(&lin.scale(C64::new(t, 0.0))).unwrap();
                acc = acc.add_mat(&m0.scale(C64::new(t * t / 2.0, 0.0))).unwrap();
                let cubic = m1.sub_mat(m0).unwrap().scale(C64::new(t * t * t / (6.0 * h), 0.0));
                acc.add_mat(&cubic).unwrap()
            }
        }
    }
}

/// Not-a-knot cubic spline second derivatives, entrywise over the matrix
/// samples. Interior continuity rows plus third-derivative continuity at
/// the second and second-to-last knots; solved by eliminating the end
/// unknowns into a tridiagonal system.
fn cubic_second_derivatives(points: &[f64], values: &[CMatrix]) -> Vec<CMatrix> {
    let n = points.len();
    let dim = values[0].rows();
    let h: Vec<f64> = points.windows(2).map(|w| w[1] - w[0]).collect();
    let mut second = vec![CMatrix::zeros(dim, dim); n];
    let k = n - 2; // unknowns M_1 ... M_{n-2}

    for r in 0..dim {
        for c in 0..dim {
            let y: Vec<C64> = values.iter().map(|v| v[(r, c)]).collect();
            let rhs_at = |i: usize| {
                ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]) * 6.0
            };
            // tridiagonal coefficients for M_1..M_{n-2}
            let mut sub = vec![0.0; k];
            let mut diag = vec![0.0; k];
            let mut sup = vec![0.0; k];
            let mut rhs = vec![C64::new(0.0, 0.0); k];
            for (row, i) in (1..=n - 2).enumerate() {
                sub[row] = h[i - 1];
                diag[row] = 2.0 * (h[i - 1] + h[i]);
                sup[row] = h[i];
                rhs[row] = rhs_at(i);
            }
            // not-a-knot at the left: M_0 = (M_1 (h0+h1) - M_2 h0) / h1
            diag[0] += h[0] * (h[0] + h[1]) / h[1];
            sup[0] -= h[0] * h[0] / h[1];
            // not-a-knot at the right: M_{n-1} = (M_{n-2}(h_{n-3}+h_{n-2}) - M_{n-3} h_{n-2}) / h_{n-3}
            let hm = h[n - 2];
            let hp = h[n - 3];
            diag[k - 1] += hm * (hp + hm) / hp;
            sub[k - 1] -= hm * hm / hp;

            // Thomas algorithm
            let mut m = vec![C64::new(0.0, 0.0); k];
            let mut cp = vec![0.0; k];
            let mut dp = vec![C64::new(0.0, 0.0); k];
            cp[0] = sup[0] / diag[0];
            dp[0] = rhs[0] / diag[0];
            for i in 1..k {
                let denom = diag[i] - sub[i] * cp[i - 1];
                cp[i] = sup[i] / denom;
                dp[i] = (rhs[i] - dp[i - 1] * sub[i]) / denom;
            }
            m[k - 1] = dp[k - 1];
            for i in (0..k - 1).rev() {
                m[i] = dp[i] - m[i + 1] * cp[i];
            }

            for (row, i) in (1..=n - 2).enumerate() {
                second[i][(r, c)] = m[row];
            }
            second[0][(r, c)] = (m[0] * (h[0] + h[1]) - m[1] * h[0]) / h[1];
            second[n - 1][(r, c)] = (m[k - 1] * (hp + hm) - m[k - 2] * hm) / hp;
        }
    }
    second
}

#[derive(Clone, PartialEq, Debug)]
enum Repr {
    Constant(CMatrix),
    Affine { a0: CMatrix, a1: CMatrix },
    Grid(GridFn),
    Sum(Vec<MatrixFn>),
    Scaled(C64, Box<MatrixFn>),
    Kron(Box<MatrixFn>, Box<MatrixFn>),
    DirectSum(Vec<MatrixFn>),
    Conj(Box<MatrixFn>),
    /// Scalar `|f(x)|^2` (dim 1 only).
    AbsSq(Box<MatrixFn>),
    /// `i * diag(q_1(x), ..., q_D(x))` from scalar functions.
    DiagImag(Vec<MatrixFn>),
    /// Generalized permutation `e^{i diag(t(x))} P`; exactly unimodular
    /// entries for real-valued phase profiles.
    PhaseDiagPerm { phases: Vec<MatrixFn>, perm: Vec<usize> },
    /// Similarity transform `g(x) f(x) g(x)^{-1}`.
    GaugeConj { g: Box<MatrixFn>, inner: Box<MatrixFn> },
    /// Connection term `dg(x) g(x)^{-1}`.
    GaugeDeriv { g: Box<MatrixFn>, dg: Box<MatrixFn> },
    /// `e^{(x - base) gen} inner e^{-(x - base) gen}`.
    ConjByExp { gen: CMatrix, base: f64, inner: CMatrix },
}

/// Matrix-valued function on an interval.
#[derive(Clone, PartialEq, Debug)]
pub struct MatrixFn {
    dim: usize,
    domain: Interval,
    repr: Repr,
}

impl MatrixFn {
    pub fn constant(domain: Interval, value: CMatrix) -> Result<Self> {
        if !value.is_square() {
            return Err(Error::Dimension("matrix function values must be square".into()));
        }
        Ok(MatrixFn { dim: value.rows(), domain, repr: Repr::Constant(value) })
    }

    pub fn zero(domain: Interval, dim: usize) -> Self {
        MatrixFn { dim, domain, repr: Repr::Constant(CMatrix::zeros(dim, dim)) }
    }

    pub fn identity(domain: Interval, dim: usize) -> Self {
        MatrixFn { dim, domain, repr: Repr::Constant(CMatrix::identity(dim)) }
    }

    /// Scalar (1x1) constant.
    pub fn scalar(domain: Interval, z: C64) -> Self {
        MatrixFn { dim: 1, domain, repr: Repr::Constant(CMatrix::scalar(z)) }
    }

    pub fn affine(domain: Interval, a0: CMatrix, a1: CMatrix) -> Result<Self> {
        if !a0.is_square() || a0.rows() != a1.rows() || a0.cols() != a1.cols() {
            return Err(Error::Dimension("affine parts must be square and congruent".into()));
        }
        Ok(MatrixFn { dim: a0.rows(), domain, repr: Repr::Affine { a0, a1 } })
    }

    pub fn grid(
        domain: Interval,
        points: Vec<f64>,
        values: Vec<CMatrix>,
        order: InterpOrder,
    ) -> Result<Self> {
        if points.iter().any(|&p| !domain.contains(p)) {
            return Err(Error::Domain("grid points must lie inside the domain".into()));
        }
        let g = GridFn::new(points, values, order)?;
        Ok(MatrixFn { dim: g.dim(), domain, repr: Repr::Grid(g) })
    }

    /// Sample a scalar closure onto a cubic grid spanning the domain.
    pub fn from_scalar_samples(
        domain: Interval,
        samples: usize,
        f: impl Fn(f64) -> C64,
    ) -> Result<Self> {
        if samples < 4 {
            return Err(Error::Validation("need at least 4 samples for a cubic grid".into()));
        }
        let h = domain.length() / (samples - 1) as f64;
        let points: Vec<f64> = (0..samples).map(|i| domain.x_minus() + i as f64 * h).collect();
        let values = points.iter().map(|&x| CMatrix::scalar(f(x))).collect();
        MatrixFn::grid(domain, points, values, InterpOrder::Cubic)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// The constant value, when the representation folded to one.
    pub fn constant_value(&self) -> Option<&CMatrix> {
        match &self.repr {
            Repr::Constant(m) => Some(m),
            _ => None,
        }
    }

    fn check_pair(a: &MatrixFn, b: &MatrixFn) -> Result<()> {
        if a.domain != b.domain {
            return Err(Error::Domain("matrix functions live on different intervals".into()));
        }
        Ok(())
    }

    /// Pointwise sum. Folds constants, affines, and grids sharing a layout.
    pub fn sum(parts: Vec<MatrixFn>) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Validation("empty sum".into()))?;
        let (dim, domain) = (first.dim, first.domain);
        for p in &parts {
            if p.dim != dim {
                return Err(Error::Dimension("sum of matrix functions with mixed dims".into()));
            }
            Self::check_pair(first, p)?;
        }
        if parts.len() == 1 {
            return Ok(parts.into_iter().next().unwrap());
        }
        let all_const = parts.iter().all(|p| matches!(p.repr, Repr::Constant(_)));
        if all_const {
            let mut acc = CMatrix::zeros(dim, dim);
            for p in &parts {
                if let Repr::Constant(m) = &p.repr {
                    acc = acc.add_mat(m)?;
                }
            }
            return MatrixFn::constant(domain, acc);
        }
        let affine_like =
            parts.iter().all(|p| matches!(p.repr, Repr::Constant(_) | Repr::Affine { .. }));
        if affine_like {
            let mut a0 = CMatrix::zeros(dim, dim);
            let mut a1 = CMatrix::zeros(dim, dim);
            for p in &parts {
                match &p.repr {
                    Repr::Constant(m) => a0 = a0.add_mat(m)?,
                    Repr::Affine { a0: b0, a1: b1 } => {
                        a0 = a0.add_mat(b0)?;
                        a1 = a1.add_mat(b1)?;
                    }
                    _ => unreachable!(),
                }
            }
            return MatrixFn::affine(domain, a0, a1);
        }
        // grids with one shared layout, plus constants
        let layout = parts.iter().find_map(|p| match &p.repr {
            Repr::Grid(g) => Some(g.clone()),
            _ => None,
        });
        if let Some(proto) = layout {
            let foldable = parts.iter().all(|p| match &p.repr {
                Repr::Constant(_) => true,
                Repr::Grid(g) => g.same_layout(&proto),
                _ => false,
            });
            if foldable {
                let mut values = vec![CMatrix::zeros(dim, dim); proto.points.len()];
                for p in &parts {
                    match &p.repr {
                        Repr::Constant(m) => {
                            for v in values.iter_mut() {
                                *v = v.add_mat(m)?;
                            }
                        }
                        Repr::Grid(g) => {
                            for (v, gv) in values.iter_mut().zip(&g.values) {
                                *v = v.add_mat(gv)?;
                            }
                        }
                        _ => unreachable!(),
                    }
                }
                return MatrixFn::grid(domain, proto.points, values, proto.order);
            }
        }
        Ok(MatrixFn { dim, domain, repr: Repr::Sum(parts) })
    }

    pub fn scaled(factor: C64, f: MatrixFn) -> Self {
        if factor == C64::new(1.0, 0.0) {
            return f;
        }
        let repr = match f.repr {
            Repr::Constant(m) => Repr::Constant(m.scale(factor)),
            Repr::Affine { a0, a1 } => Repr::Affine { a0: a0.scale(factor), a1: a1.scale(factor) },
            Repr::Grid(g) => Repr::Grid(GridFn {
                points: g.points,
                values: g.values.iter().map(|v| v.scale(factor)).collect(),
                order: g.order,
                second: g.second.iter().map(|v| v.scale(factor)).collect(),
            }),
            Repr::Scaled(c, inner) => Repr::Scaled(c * factor, inner),
            other => Repr::Scaled(factor, Box::new(MatrixFn { dim: f.dim, domain: f.domain, repr: other })),
        };
        MatrixFn { dim: f.dim, domain: f.domain, repr }
    }

    /// Pointwise Kronecker product; the left factor carries the slow index.
    pub fn kron_fn(a: MatrixFn, b: MatrixFn) -> Result<Self> {
        Self::check_pair(&a, &b)?;
        let dim = a.dim * b.dim;
        let domain = a.domain;
        let repr = match (&a.repr, &b.repr) {
            (Repr::Constant(x), Repr::Constant(y)) => Repr::Constant(kron(x, y)),
            (Repr::Affine { a0, a1 }, Repr::Constant(y)) => {
                Repr::Affine { a0: kron(a0, y), a1: kron(a1, y) }
            }
            (Repr::Constant(x), Repr::Affine { a0, a1 }) => {
                Repr::Affine { a0: kron(x, a0), a1: kron(x, a1) }
            }
            (Repr::Grid(g), Repr::Constant(y)) => {
                let gg = g.map_values(|v| kron(v, y));
                Repr::Grid(GridFn::new(gg.points, gg.values, gg.order).unwrap())
            }
            (Repr::Constant(x), Repr::Grid(g)) => {
                let gg = g.map_values(|v| kron(x, v));
                Repr::Grid(GridFn::new(gg.points, gg.values, gg.order).unwrap())
            }
            (Repr::Grid(ga), Repr::Grid(gb)) if ga.same_layout(gb) => {
                let values =
                    ga.values.iter().zip(&gb.values).map(|(x, y)| kron(x, y)).collect();
                Repr::Grid(GridFn::new(ga.points.clone(), values, ga.order).unwrap())
            }
            _ => Repr::Kron(Box::new(a.clone()), Box::new(b.clone())),
        };
        Ok(MatrixFn { dim, domain, repr })
    }

    /// Block-diagonal direct sum.
    pub fn direct_sum(parts: Vec<MatrixFn>) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Validation("empty direct sum".into()))?;
        let domain = first.domain;
        for p in &parts {
            Self::check_pair(first, p)?;
        }
        let dim = parts.iter().map(|p| p.dim).sum();
        if parts.len() == 1 {
            return Ok(parts.into_iter().next().unwrap());
        }
        if parts.iter().all(|p| matches!(p.repr, Repr::Constant(_))) {
            let mut acc = CMatrix::zeros(0, 0);
            for p in &parts {
                if let Repr::Constant(m) = &p.repr {
                    acc = acc.direct_sum(m);
                }
            }
            return MatrixFn::constant(domain, acc);
        }
        Ok(MatrixFn { dim, domain, repr: Repr::DirectSum(parts) })
    }

    /// Entrywise complex conjugate.
    pub fn conj_fn(f: MatrixFn) -> Self {
        let (dim, domain) = (f.dim, f.domain);
        let repr = match f.repr {
            Repr::Constant(m) => Repr::Constant(m.conj()),
            Repr::Affine { a0, a1 } => Repr::Affine { a0: a0.conj(), a1: a1.conj() },
            Repr::Grid(g) => Repr::Grid(GridFn {
                points: g.points,
                values: g.values.iter().map(CMatrix::conj).collect(),
                order: g.order,
                second: g.second.iter().map(CMatrix::conj).collect(),
            }),
            Repr::Conj(inner) => inner.repr,
            Repr::Scaled(c, inner) => {
                return MatrixFn::scaled(c.conj(), MatrixFn::conj_fn(*inner));
            }
            Repr::Sum(parts) => {
                return MatrixFn::sum(parts.into_iter().map(MatrixFn::conj_fn).collect())
                    .expect("conjugating a valid sum");
            }
            Repr::Kron(a, b) => {
                return MatrixFn::kron_fn(MatrixFn::conj_fn(*a), MatrixFn::conj_fn(*b))
                    .expect("conjugating a valid product");
            }
            Repr::DirectSum(parts) => {
                return MatrixFn::direct_sum(parts.into_iter().map(MatrixFn::conj_fn).collect())
                    .expect("conjugating a valid direct sum");
            }
            Repr::AbsSq(inner) => Repr::AbsSq(inner),
            Repr::DiagImag(qs) => {
                // conj(i diag(q)) = -i diag(conj q)
                let conjd = qs.into_iter().map(MatrixFn::conj_fn).collect();
                return MatrixFn::scaled(
                    C64::new(-1.0, 0.0),
                    MatrixFn { dim, domain, repr: Repr::DiagImag(conjd) },
                );
            }
            Repr::PhaseDiagPerm { phases, perm } => {
                let negated = phases
                    .into_iter()
                    .map(|p| MatrixFn::scaled(C64::new(-1.0, 0.0), MatrixFn::conj_fn(p)))
                    .collect();
                Repr::PhaseDiagPerm { phases: negated, perm }
            }
            other => Repr::Conj(Box::new(MatrixFn { dim, domain, repr: other })),
        };
        MatrixFn { dim, domain, repr }
    }

    /// Scalar `|f|^2` of a 1x1 function.
    pub fn abs_sq(f: MatrixFn) -> Result<Self> {
        if f.dim != 1 {
            return Err(Error::Dimension("abs_sq is defined for scalar functions".into()));
        }
        if let Repr::Constant(m) = &f.repr {
            let z = m[(0, 0)];
            return Ok(MatrixFn::scalar(f.domain, C64::new(z.norm_sqr(), 0.0)));
        }
        Ok(MatrixFn { dim: 1, domain: f.domain, repr: Repr::AbsSq(Box::new(f)) })
    }

    /// `i * diag(q_1(x), ..., q_D(x))` from scalar functions.
    pub fn diag_imag(qs: Vec<MatrixFn>) -> Result<Self> {
        let first = qs.first().ok_or_else(|| Error::Validation("empty diagonal".into()))?;
        let domain = first.domain;
        for q in &qs {
            if q.dim != 1 {
                return Err(Error::Dimension("diagonal entries must be scalar functions".into()));
            }
            Self::check_pair(first, q)?;
        }
        let dim = qs.len();
        if qs.iter().all(|q| matches!(q.repr, Repr::Constant(_))) {
            let entries: Vec<C64> = qs
                .iter()
                .map(|q| match &q.repr {
                    Repr::Constant(m) => m[(0, 0)] * C64::new(0.0, 1.0),
                    _ => unreachable!(),
                })
                .collect();
            return MatrixFn::constant(domain, CMatrix::diag(&entries));
        }
        Ok(MatrixFn { dim, domain, repr: Repr::DiagImag(qs) })
    }

    /// Generalized permutation `e^{i diag(t(x))} P` with `P: |s> -> |perm[s]>`.
    pub fn phase_diag_perm(phases: Vec<MatrixFn>, perm: Vec<usize>) -> Result<Self> {
        let first =
            phases.first().ok_or_else(|| Error::Validation("empty phase diagonal".into()))?;
        let domain = first.domain;
        let dim = phases.len();
        if perm.len() != dim {
            return Err(Error::Dimension("permutation length must match the phase count".into()));
        }
        let mut seen = vec![false; dim];
        for &p in &perm {
            if p >= dim || seen[p] {
                return Err(Error::Validation("not a permutation of 0..D".into()));
            }
            seen[p] = true;
        }
        for t in &phases {
            if t.dim != 1 {
                return Err(Error::Dimension("phases must be scalar functions".into()));
            }
            Self::check_pair(first, t)?;
        }
        if phases.iter().all(|t| matches!(t.repr, Repr::Constant(_))) {
            let mut m = CMatrix::zeros(dim, dim);
            for (col, &row) in perm.iter().enumerate() {
                let t = match &phases[row].repr {
                    Repr::Constant(v) => v[(0, 0)],
                    _ => unreachable!(),
                };
                m[(row, col)] = (C64::new(0.0, 1.0) * t).exp();
            }
            return MatrixFn::constant(domain, m);
        }
        Ok(MatrixFn { dim, domain, repr: Repr::PhaseDiagPerm { phases, perm } })
    }

    /// Similarity transform `g f g^{-1}`, evaluated pointwise.
    pub fn gauge_conj(g: MatrixFn, inner: MatrixFn) -> Result<Self> {
        Self::check_pair(&g, &inner)?;
        if g.dim != inner.dim {
            return Err(Error::Dimension("gauge and tensor dims differ".into()));
        }
        if let (Repr::Constant(gm), Repr::Constant(fm)) = (&g.repr, &inner.repr) {
            let m = gm.mul_mat(fm)?.mul_mat(&gm.inverse()?)?;
            return MatrixFn::constant(g.domain, m);
        }
        let dim = g.dim;
        let domain = g.domain;
        Ok(MatrixFn { dim, domain, repr: Repr::GaugeConj { g: Box::new(g), inner: Box::new(inner) } })
    }

    /// Connection term `dg g^{-1}`, evaluated pointwise.
    pub fn gauge_deriv(g: MatrixFn, dg: MatrixFn) -> Result<Self> {
        Self::check_pair(&g, &dg)?;
        if g.dim != dg.dim {
            return Err(Error::Dimension("gauge and derivative dims differ".into()));
        }
        if let (Repr::Constant(gm), Repr::Constant(dgm)) = (&g.repr, &dg.repr) {
            let m = dgm.mul_mat(&gm.inverse()?)?;
            return MatrixFn::constant(g.domain, m);
        }
        let dim = g.dim;
        let domain = g.domain;
        Ok(MatrixFn { dim, domain, repr: Repr::GaugeDeriv { g: Box::new(g), dg: Box::new(dg) } })
    }

    /// `e^{(x-base) gen} inner e^{-(x-base) gen}` (dressed constant tensor).
    pub fn conj_by_exp(domain: Interval, gen: CMatrix, base: f64, inner: CMatrix) -> Result<Self> {
        if !gen.is_square() || gen.rows() != inner.rows() || !inner.is_square() {
            return Err(Error::Dimension("conjugation needs congruent square matrices".into()));
        }
        if gen.is_zero() {
            return MatrixFn::constant(domain, inner);
        }
        let dim = gen.rows();
        Ok(MatrixFn { dim, domain, repr: Repr::ConjByExp { gen, base, inner } })
    }

    /// Evaluate at a point of the domain.
    pub fn evaluate(&self, x: f64) -> Result<CMatrix> {
        if !self.domain.contains(x) {
            return Err(Error::Domain(format!(
                "evaluation point {x} outside [{}, {}]",
                self.domain.x_minus, self.domain.x_plus
            )));
        }
        Ok(self.eval_unchecked(self.domain.clamp(x)))
    }

    fn eval_unchecked(&self, x: f64) -> CMatrix {
        match &self.repr {
            Repr::Constant(m) => m.clone(),
            Repr::Affine { a0, a1 } => a0.add_mat(&a1.scale(C64::new(x, 0.0))).unwrap(),
            Repr::Grid(g) => g.eval(x),
            Repr::Sum(parts) => {
                let mut acc = CMatrix::zeros(self.dim, self.dim);
                for p in parts {
                    acc = acc.add_mat(&p.eval_unchecked(x)).unwrap();
                }
                acc
            }
            Repr::Scaled(c, inner) => inner.eval_unchecked(x).scale(*c),
            Repr::Kron(a, b) => kron(&a.eval_unchecked(x), &b.eval_unchecked(x)),
            Repr::DirectSum(parts) => {
                let mut acc = CMatrix::zeros(0, 0);
                for p in parts {
                    acc = acc.direct_sum(&p.eval_unchecked(x));
                }
                acc
            }
            Repr::Conj(inner) => inner.eval_unchecked(x).conj(),
            Repr::AbsSq(inner) => {
                let z = inner.eval_unchecked(x)[(0, 0)];
                CMatrix::scalar(C64::new(z.norm_sqr(), 0.0))
            }
            Repr::DiagImag(qs) => {
                let entries: Vec<C64> = qs
                    .iter()
                    .map(|q| q.eval_unchecked(x)[(0, 0)] * C64::new(0.0, 1.0))
                    .collect();
                CMatrix::diag(&entries)
            }
            Repr::PhaseDiagPerm { phases, perm } => {
                let mut m = CMatrix::zeros(self.dim, self.dim);
                for (col, &row) in perm.iter().enumerate() {
                    let t = phases[row].eval_unchecked(x)[(0, 0)];
                    m[(row, col)] = (C64::new(0.0, 1.0) * t).exp();
                }
                m
            }
            Repr::GaugeConj { g, inner } => {
                let gm = g.eval_unchecked(x);
                let ginv = gm.inverse().expect("gauge matrix invertible on the interval");
                gm.mul_mat(&inner.eval_unchecked(x)).unwrap().mul_mat(&ginv).unwrap()
            }
            Repr::GaugeDeriv { g, dg } => {
                let ginv = g
                    .eval_unchecked(x)
                    .inverse()
                    .expect("gauge matrix invertible on the interval");
                dg.eval_unchecked(x).mul_mat(&ginv).unwrap()
            }
            Repr::ConjByExp { gen, base, inner } => {
                let e = mat_exp(&gen.scale(C64::new(x - base, 0.0))).expect("exp of square");
                let einv = mat_exp(&gen.scale(C64::new(base - x, 0.0))).expect("exp of square");
                e.mul_mat(inner).unwrap().mul_mat(&einv).unwrap()
            }
        }
    }

    /// Scalar evaluation shortcut for 1x1 functions.
    pub fn evaluate_scalar(&self, x: f64) -> Result<C64> {
        if self.dim != 1 {
            return Err(Error::Dimension("not a scalar function".into()));
        }
        Ok(self.evaluate(x)?[(0, 0)])
    }

    /// Breakpoints of a piecewise-constant function: `Some(splits)` when
    /// the function is constant between consecutive splits (and outside
    /// them), `None` when it varies continuously.
    pub fn piecewise_const_breaks(&self) -> Option<Vec<f64>> {
        fn merge(mut acc: Vec<f64>, more: Vec<f64>) -> Vec<f64> {
            acc.extend(more);
            acc.sort_by(|a, b| a.partial_cmp(b).unwrap());
            acc.dedup();
            acc
        }
        match &self.repr {
            Repr::Constant(_) => Some(Vec::new()),
            Repr::Affine { a1, .. } => a1.is_zero().then(Vec::new),
            Repr::Grid(g) => match g.order {
                InterpOrder::Nearest => Some(g.points.clone()),
                _ if g.points.len() == 1 => Some(Vec::new()),
                _ => None,
            },
            Repr::Sum(parts) | Repr::DirectSum(parts) | Repr::DiagImag(parts) => {
                let mut acc = Vec::new();
                for p in parts {
                    acc = merge(acc, p.piecewise_const_breaks()?);
                }
                Some(acc)
            }
            Repr::Scaled(_, inner) | Repr::Conj(inner) | Repr::AbsSq(inner) => {
                inner.piecewise_const_breaks()
            }
            Repr::Kron(a, b) => {
                Some(merge(a.piecewise_const_breaks()?, b.piecewise_const_breaks()?))
            }
            Repr::PhaseDiagPerm { phases, .. } => {
                let mut acc = Vec::new();
                for p in phases {
                    acc = merge(acc, p.piecewise_const_breaks()?);
                }
                Some(acc)
            }
            Repr::GaugeConj { g, inner } => match g.repr {
                Repr::Constant(_) => inner.piecewise_const_breaks(),
                _ => None,
            },
            Repr::GaugeDeriv { g, dg } => match g.repr {
                Repr::Constant(_) => dg.piecewise_const_breaks(),
                _ => None,
            },
            Repr::ConjByExp { gen, .. } => gen.is_zero().then(Vec::new),
        }
    }

    /// Interior points where smoothness may fail (grid knots); integrators
    /// split at these.
    pub fn split_points(&self) -> Vec<f64> {
        fn collect(f: &MatrixFn, acc: &mut Vec<f64>) {
            match &f.repr {
                Repr::Grid(g) => acc.extend_from_slice(&g.points),
                Repr::Sum(parts) | Repr::DirectSum(parts) | Repr::DiagImag(parts) => {
                    parts.iter().for_each(|p| collect(p, acc));
                }
                Repr::Scaled(_, inner) | Repr::Conj(inner) | Repr::AbsSq(inner) => {
                    collect(inner, acc);
                }
                Repr::Kron(a, b) => {
                    collect(a, acc);
                    collect(b, acc);
                }
                Repr::PhaseDiagPerm { phases, .. } => phases.iter().for_each(|p| collect(p, acc)),
                Repr::GaugeConj { g, inner } => {
                    collect(g, acc);
                    collect(inner, acc);
                }
                Repr::GaugeDeriv { g, dg } => {
                    collect(g, acc);
                    collect(dg, acc);
                }
                _ => {}
            }
        }
        let mut acc = Vec::new();
        collect(self, &mut acc);
        acc.sort_by(|a, b| a.partial_cmp(b).unwrap());
        acc.dedup();
        acc
    }

    /// Resample onto a plain grid leaf (used when writing expression trees
    /// to disk). Piecewise-constant trees resample exactly onto an
    /// order-0 grid; anything else is sampled onto a cubic grid.
    pub fn to_grid_leaf(&self, samples: usize) -> Result<MatrixFn> {
        match &self.repr {
            Repr::Constant(_) | Repr::Affine { .. } | Repr::Grid(_) => Ok(self.clone()),
            _ => {
                if let Some(breaks) = self.piecewise_const_breaks() {
                    let mut starts = vec![self.domain.x_minus()];
                    starts.extend(breaks.iter().filter(|&&b| {
                        b > self.domain.x_minus() && b < self.domain.x_plus()
                    }));
                    let mut edges = starts.clone();
                    edges.push(self.domain.x_plus());
                    let values = edges
                        .windows(2)
                        .map(|w| self.evaluate((w[0] + w[1]) / 2.0))
                        .collect::<Result<Vec<_>>>()?;
                    return MatrixFn::grid(self.domain, starts, values, InterpOrder::Nearest);
                }
                let n = samples.max(8);
                let h = self.domain.length() / (n - 1) as f64;
                let points: Vec<f64> =
                    (0..n).map(|i| self.domain.x_minus() + i as f64 * h).collect();
                let values = points
                    .iter()
                    .map(|&x| self.evaluate(x))
                    .collect::<Result<Vec<_>>>()?;
                MatrixFn::grid(self.domain, points, values, InterpOrder::Cubic)
            }
        }
    }

    /// True when the function is diagonal at every point by construction
    /// (exact zero off-diagonal entries); enables closed-form propagators.
    pub fn is_structurally_diagonal(&self) -> bool {
        fn diag_matrix(m: &CMatrix) -> bool {
            (0..m.rows()).all(|i| {
                (0..m.cols())
                    .all(|j| i == j || (m[(i, j)].re == 0.0 && m[(i, j)].im == 0.0))
            })
        }
        match &self.repr {
            Repr::Constant(m) => diag_matrix(m),
            Repr::Affine { a0, a1 } => diag_matrix(a0) && diag_matrix(a1),
            Repr::Grid(g) => g.values.iter().all(diag_matrix),
            Repr::Sum(parts) | Repr::DirectSum(parts) => {
                parts.iter().all(MatrixFn::is_structurally_diagonal)
            }
            Repr::Scaled(_, inner) | Repr::Conj(inner) => inner.is_structurally_diagonal(),
            Repr::Kron(a, b) => a.is_structurally_diagonal() && b.is_structurally_diagonal(),
            Repr::AbsSq(_) | Repr::DiagImag(_) => true,
            Repr::PhaseDiagPerm { perm, .. } => perm.iter().enumerate().all(|(i, &p)| i == p),
            Repr::ConjByExp { gen, inner, .. } => diag_matrix(gen) && diag_matrix(inner),
            Repr::GaugeConj { .. } | Repr::GaugeDeriv { .. } => false,
        }
    }

    /// True when all sampled imaginary parts vanish (used to validate
    /// real-valued phase profiles).
    pub fn is_real_on_samples(&self, samples: usize, tol: f64) -> Result<bool> {
        for i in 0..samples {
            let x = self.domain.x_minus()
                + self.domain.length() * (i as f64 + 0.5) / samples as f64;
            let v = self.evaluate(x)?;
            for k in 0..v.rows() {
                for l in 0..v.cols() {
                    if v[(k, l)].im.abs() > tol {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }
}

/// Central-difference derivative sampled onto a cubic grid; opt-in helper
/// for callers that do not have an analytic derivative at hand.
pub fn numeric_derivative(f: &MatrixFn, samples: usize) -> Result<MatrixFn> {
    if samples < 8 {
        return Err(Error::Validation("need at least 8 samples to differentiate".into()));
    }
    let dom = f.domain();
    let h = dom.length() / (samples - 1) as f64;
    let step = h / 64.0;
    let mut points = Vec::with_capacity(samples);
    let mut values = Vec::with_capacity(samples);
    for i in 0..samples {
        let x = dom.x_minus() + i as f64 * h;
        let (lo, hi) = if x - step < dom.x_minus() {
            (x, x + step)
        } else if x + step > dom.x_plus() {
            (x - step, x)
        } else {
            (x - step, x + step)
        };
        let d = f
            .evaluate(hi)?
            .sub_mat(&f.evaluate(lo)?)?
            .scale(C64::new(1.0 / (hi - lo), 0.0));
        points.push(x);
        values.push(d);
    }
    MatrixFn::grid(dom, points, values, InterpOrder::Cubic)
}

/// Adaptive Simpson quadrature of a scalar function over `[a, b]`,
/// splitting at the function's grid knots first.
pub fn integrate_scalar(f: &MatrixFn, a: f64, b: f64, tol: f64) -> Result<C64> {
    if f.dim() != 1 {
        return Err(Error::Dimension("quadrature target must be scalar".into()));
    }
    if a > b {
        return Err(Error::Domain("reversed integration bounds".into()));
    }
    if !f.domain().contains(a) || !f.domain().contains(b) {
        return Err(Error::Domain("integration bounds outside the domain".into()));
    }
    if let Some(breaks) = f.piecewise_const_breaks() {
        // exact: sum of segment lengths times values
        let mut edges = vec![a];
        edges.extend(breaks.iter().copied().filter(|&p| p > a && p < b));
        edges.push(b);
        let mut acc = C64::new(0.0, 0.0);
        for w in edges.windows(2) {
            acc += f.evaluate_scalar((w[0] + w[1]) / 2.0)? * (w[1] - w[0]);
        }
        return Ok(acc);
    }
    let mut edges = vec![a];
    edges.extend(f.split_points().into_iter().filter(|&p| p > a && p < b));
    edges.push(b);
    let eval = |x: f64| f.evaluate_scalar(x);
    let mut acc = C64::new(0.0, 0.0);
    for w in edges.windows(2) {
        acc += adaptive_simpson(&eval, w[0], w[1], tol / (edges.len() - 1) as f64)?;
    }
    Ok(acc)
}

/// Adaptive Simpson quadrature of a scalar closure (crate-internal; the
/// caller is responsible for splitting at known kinks).
pub(crate) fn integrate_closure(
    eval: &impl Fn(f64) -> Result<C64>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<C64> {
    adaptive_simpson(eval, a, b, tol)
}

fn adaptive_simpson(
    eval: &impl Fn(f64) -> Result<C64>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<C64> {
    fn simpson(fa: C64, fm: C64, fb: C64, h: f64) -> C64 {
        (fa + fm * 4.0 + fb) * (h / 6.0)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        eval: &impl Fn(f64) -> Result<C64>,
        a: f64,
        b: f64,
        fa: C64,
        fm: C64,
        fb: C64,
        whole: C64,
        tol: f64,
        depth: usize,
    ) -> Result<C64> {
        let m = (a + b) / 2.0;
        let lm = (a + m) / 2.0;
        let rm = (m + b) / 2.0;
        let flm = eval(lm)?;
        let frm = eval(rm)?;
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.norm() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        let l = recurse(eval, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?;
        let r = recurse(eval, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?;
        Ok(l + r)
    }
    if a == b {
        return Ok(C64::new(0.0, 0.0));
    }
    let fa = eval(a)?;
    let m = (a + b) / 2.0;
    let fm = eval(m)?;
    let fb = eval(b)?;
    let whole = simpson(fa, fm, fb, b - a);
    recurse(eval, a, b, fa, fm, fb, whole, tol, 48)
}

// Serialization: plain representations carry their payload; expression
// trees are resampled onto grids first.
impl Serialize for MatrixFn {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::Error as _;
        let leaf = self.to_grid_leaf(161).map_err(S::Error::custom)?;
        match &leaf.repr {
            Repr::Constant(m) => {
                let mut s = serializer.serialize_struct("MatrixFn", 4)?;
                s.serialize_field("kind", "constant")?;
                s.serialize_field("dim", &leaf.dim)?;
                s.serialize_field("domain", &leaf.domain)?;
                s.serialize_field("matrix", m)?;
                s.end()
            }
            Repr::Affine { a0, a1 } => {
                let mut s = serializer.serialize_struct("MatrixFn", 5)?;
                s.serialize_field("kind", "affine")?;
                s.serialize_field("dim", &leaf.dim)?;
                s.serialize_field("domain", &leaf.domain)?;
                s.serialize_field("a0", a0)?;
                s.serialize_field("a1", a1)?;
                s.end()
            }
            Repr::Grid(g) => {
                let mut s = serializer.serialize_struct("MatrixFn", 6)?;
                s.serialize_field("kind", "grid")?;
                s.serialize_field("dim", &leaf.dim)?;
                s.serialize_field("domain", &leaf.domain)?;
                s.serialize_field("order", &g.order.code())?;
                s.serialize_field("points", &g.points)?;
                s.serialize_field("values", &g.values)?;
                s.end()
            }
            _ => unreachable!("to_grid_leaf returns plain representations"),
        }
    }
}

#[derive(Deserialize)]
struct MatrixFnWire {
    kind: String,
    #[allow(dead_code)]
    dim: Option<usize>,
    domain: Interval,
    matrix: Option<CMatrix>,
    a0: Option<CMatrix>,
    a1: Option<CMatrix>,
    order: Option<u8>,
    points: Option<Vec<f64>>,
    values: Option<Vec<CMatrix>>,
}

impl<'de> Deserialize<'de> for MatrixFn {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = MatrixFnWire::deserialize(deserializer)?;
        let out = match wire.kind.as_str() {
            "constant" => {
                let m = wire.matrix.ok_or_else(|| D::Error::missing_field("matrix"))?;
                MatrixFn::constant(wire.domain, m)
            }
            "affine" => {
                let a0 = wire.a0.ok_or_else(|| D::Error::missing_field("a0"))?;
                let a1 = wire.a1.ok_or_else(|| D::Error::missing_field("a1"))?;
                MatrixFn::affine(wire.domain, a0, a1)
            }
            "grid" => {
                let order = InterpOrder::from_code(
                    wire.order.ok_or_else(|| D::Error::missing_field("order"))?,
                )
                .map_err(D::Error::custom)?;
                let points = wire.points.ok_or_else(|| D::Error::missing_field("points"))?;
                let values = wire.values.ok_or_else(|| D::Error::missing_field("values"))?;
                MatrixFn::grid(wire.domain, points, values, order)
            }
            other => return Err(D::Error::custom(format!("unknown matrix function kind {other}"))),
        };
        out.map_err(D::Error::custom)
    }
}
