//! Dense complex matrices and the handful of kernels everything else is
//! built on: products, Kronecker products, LU solves, and the matrix
//! exponential via scaling-and-squaring with Padé approximants.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Dense row-major complex matrix.
///
/// All entries are finite by construction; operations that could produce
/// non-finite values (inversion of singular matrices) fail instead.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, entries: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Build from a row-major entry list. Fails if the length does not
    /// match `rows * cols` or any entry is non-finite.
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "entry list of length {} does not fill a {}x{} matrix",
                entries.len(),
                rows,
                cols
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("matrix entries must be finite".into()));
        }
        Ok(CMatrix { rows, cols, entries })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged row lengths".into()));
        }
        CMatrix::from_entries(r, c, rows.concat())
    }

    /// 1x1 matrix holding a single scalar.
    pub fn scalar(z: C64) -> Self {
        CMatrix { rows: 1, cols: 1, entries: vec![z] }
    }

    /// Basis matrix unit `E_{i,j}` of size `n`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        m[(i, j)] = C64::new(1.0, 0.0);
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn scale(&self, z: C64) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e * z).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        self.transpose().conj()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn norm_fro(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn mul_mat(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let lhs_row = &self.entries[i * self.cols..(i + 1) * self.cols];
            let out_row = &mut out.entries[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in lhs_row.iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rhs_row = &other.entries[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add_mat(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension("shape mismatch in addition".into()));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(CMatrix { rows: self.rows, cols: self.cols, entries })
    }

    pub fn sub_mat(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension("shape mismatch in subtraction".into()));
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(CMatrix { rows: self.rows, cols: self.cols, entries })
    }

    /// `n`-th matrix power by repeated multiplication.
    pub fn pow(&self, n: usize) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::Dimension("matrix power needs a square matrix".into()));
        }
        let mut out = CMatrix::identity(self.rows);
        for _ in 0..n {
            out = out.mul_mat(self)?;
        }
        Ok(out)
    }

    /// Block diagonal concatenation.
    pub fn direct_sum(&self, other: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows + other.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
        }
        for i in 0..other.rows {
            for j in 0..other.cols {
                out[(self.rows + i, self.cols + j)] = other[(i, j)];
            }
        }
        out
    }

    /// LU decomposition with partial pivoting; returns (lu, perm, sign swaps).
    fn lu(&self) -> Result<(Vec<C64>, Vec<usize>, usize)> {
        if !self.is_square() {
            return Err(Error::Dimension("LU factorization needs a square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.entries.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps = 0;
        for k in 0..n {
            let mut pivot = k;
            let mut best = a[k * n + k].norm();
            for i in (k + 1)..n {
                let v = a[i * n + k].norm();
                if v > best {
                    best = v;
                    pivot = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Domain("singular matrix".into()));
            }
            if pivot != k {
                for j in 0..n {
                    a.swap(k * n + j, pivot * n + j);
                }
                perm.swap(k, pivot);
                swaps += 1;
            }
            let inv_piv = C64::new(1.0, 0.0) / a[k * n + k];
            for i in (k + 1)..n {
                let factor = a[i * n + k] * inv_piv;
                a[i * n + k] = factor;
                for j in (k + 1)..n {
                    let sub = factor * a[k * n + j];
                    a[i * n + j] -= sub;
                }
            }
        }
        Ok((a, perm, swaps))
    }

    /// Solve `self * X = B` for X.
    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix> {
        if self.rows != b.rows {
            return Err(Error::Dimension("solve: row count mismatch".into()));
        }
        let n = self.rows;
        let (lu, perm, _) = self.lu()?;
        let mut x = CMatrix::zeros(n, b.cols);
        for c in 0..b.cols {
            // forward substitution on the permuted RHS
            let mut y = vec![C64::new(0.0, 0.0); n];
            for i in 0..n {
                let mut acc = b[(perm[i], c)];
                for (j, yj) in y.iter().enumerate().take(i) {
                    acc -= lu[i * n + j] * yj;
                }
                y[i] = acc;
            }
            for i in (0..n).rev() {
                let mut acc = y[i];
                for j in (i + 1)..n {
                    acc -= lu[i * n + j] * x[(j, c)];
                }
                x[(i, c)] = acc / lu[i * n + i];
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<CMatrix> {
        self.solve(&CMatrix::identity(self.rows))
    }

    pub fn det(&self) -> Result<C64> {
        let n = self.rows;
        let (lu, _, swaps) = self.lu()?;
        let mut d = if swaps % 2 == 0 { C64::new(1.0, 0.0) } else { C64::new(-1.0, 0.0) };
        for i in 0..n {
            d *= lu[i * n + i];
        }
        Ok(d)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.entries[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.entries[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        self.add_mat(rhs).expect("shape mismatch in +")
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        self.sub_mat(rhs).expect("shape mismatch in -")
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.mul_mat(rhs).expect("shape mismatch in *")
    }
}

/// Kronecker product; the left factor carries the slow index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for i1 in 0..a.rows() {
        for j1 in 0..a.cols() {
            let f = a[(i1, j1)];
            if f.re == 0.0 && f.im == 0.0 {
                continue;
            }
            for i2 in 0..b.rows() {
                for j2 in 0..b.cols() {
                    out[(i1 * b.rows() + i2, j1 * b.cols() + j2)] = f * b[(i2, j2)];
                }
            }
        }
    }
    out
}

/// Ladder matrices of the spin-j representation with `dim = 2j + 1`.
///
/// Basis ordered from the lowest weight upward, so `jp` raises the basis
/// index: `jp[(k+1, k)] = sqrt(j(j+1) - m(m+1))` with `m = -j + k`, and
/// `jm = jp†`.
pub fn su2_ladder(dim: usize) -> Result<(CMatrix, CMatrix)> {
    if dim < 2 {
        return Err(Error::Domain("ladder representation needs dim >= 2".into()));
    }
    let j = (dim as f64 - 1.0) / 2.0;
    let mut jp = CMatrix::zeros(dim, dim);
    for k in 0..(dim - 1) {
        let m = -j + k as f64;
        jp[(k + 1, k)] = C64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let jm = jp.dagger();
    Ok((jp, jm))
}

// Padé order thresholds for the 1-norm of the scaled matrix.
const EXPM_THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.53939833006323e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 4.25),
];

fn pade_coefficients(m: usize) -> Vec<f64> {
    // b_k = (2m - k)! m! / ((2m)! (m - k)! k!)
    let mut b = vec![0.0; m + 1];
    b[m] = 1.0;
    for k in (0..m).rev() {
        // from the factorials: b_k / b_{k+1} = (2m - k)(k + 1) / (m - k)
        b[k] = b[k + 1] * ((2 * m - k) as f64) * ((k + 1) as f64) / ((m - k) as f64);
    }
    b
}

fn expm_pade(a: &CMatrix, m: usize) -> Result<CMatrix> {
    let n = a.rows();
    let b = pade_coefficients(m);
    let a2 = a.mul_mat(a)?;
    // U = A * (sum over odd k of b_k A^{k-1}), V = sum over even k of b_k A^k
    let mut even = CMatrix::identity(n).scale(C64::new(b[0], 0.0));
    let mut odd = CMatrix::identity(n).scale(C64::new(b[1], 0.0));
    let mut power = CMatrix::identity(n);
    for k in (2..=m).step_by(2) {
        power = power.mul_mat(&a2)?;
        even = even.add_mat(&power.scale(C64::new(b[k], 0.0)))?;
        if k < m {
            odd = odd.add_mat(&power.scale(C64::new(b[k + 1], 0.0)))?;
        }
    }
    let u = a.mul_mat(&odd)?;
    // (V - U) X = (V + U)
    even.sub_mat(&u)?.solve(&even.add_mat(&u)?)
}

/// Matrix exponential by scaling-and-squaring with diagonal Padé
/// approximants, order selected from the 1-norm. Relative accuracy is at
/// the 1e-13 level for norms up to ~50.
pub fn mat_exp(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension("matrix exponential needs a square matrix".into()));
    }
    let norm = m.norm_one();
    for &(order, theta) in &EXPM_THETA[..4] {
        if norm <= theta {
            return expm_pade(m, order);
        }
    }
    let theta13 = EXPM_THETA[4].1;
    let mut s = 0u32;
    let mut scaled_norm = norm;
    while scaled_norm > theta13 {
        scaled_norm /= 2.0;
        s += 1;
    }
    let scaled = m.scale(C64::new((0.5f64).powi(s as i32), 0.0));
    let mut e = expm_pade(&scaled, 13)?;
    for _ in 0..s {
        e = e.mul_mat(&e)?;
    }
    Ok(e)
}

/// Matrix exponential of a nilpotent matrix by an exactly terminating
/// Taylor series. Returns `None` if no power vanishes within `dim` steps.
pub fn mat_exp_nilpotent(m: &CMatrix) -> Option<CMatrix> {
    nilpotent_power_table(m).map(|table| {
        let mut acc = CMatrix::zeros(m.rows(), m.cols());
        for term in &table {
            acc = acc.add_mat(term).expect("shape");
        }
        acc
    })
}

/// Powers `m^k / k!` until the product becomes exactly zero. `None` when
/// the matrix is not structurally nilpotent.
pub fn nilpotent_power_table(m: &CMatrix) -> Option<Vec<CMatrix>> {
    if !m.is_square() {
        return None;
    }
    let n = m.rows();
    let mut table = vec![CMatrix::identity(n)];
    let mut power = CMatrix::identity(n);
    for k in 1..=n {
        power = power.mul_mat(m).ok()?;
        power = power.scale(C64::new(1.0 / k as f64, 0.0));
        if power.is_zero() {
            return Some(table);
        }
        table.push(power.clone());
    }
    None
}

// Serialization: a matrix is a nested row array of [re, im] pairs.
impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.rows)
            .map(|i| self.row(i).iter().map(|z| [z.re, z.im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        let entries = rows.into_iter().flatten().map(|[re, im]| C64::new(re, im)).collect();
        CMatrix::from_entries(r, c, entries).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::random_matrix;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        a.sub_mat(b).unwrap().norm_fro() <= tol
    }

    /// Term-by-term Taylor summation to machine convergence; the
    /// independent reference for `mat_exp`.
    fn taylor_exp(m: &CMatrix) -> CMatrix {
        let n = m.rows();
        let mut acc = CMatrix::identity(n);
        let mut term = CMatrix::identity(n);
        for k in 1..300 {
            term = term.mul_mat(m).unwrap().scale(C64::new(1.0 / k as f64, 0.0));
            acc = acc.add_mat(&term).unwrap();
            if term.norm_fro() < 1e-18 * acc.norm_fro() {
                break;
            }
        }
        acc
    }

    #[test]
    fn exp_of_zero_is_identity() {
        for d in 1..5 {
            let e = mat_exp(&CMatrix::zeros(d, d)).unwrap();
            assert!(close(&e, &CMatrix::identity(d), 0.0));
        }
    }

    #[test]
    fn exp_of_diagonal_phases() {
        let m = CMatrix::diag(&[
            C64::new(0.0, std::f64::consts::PI),
            C64::new(0.0, -std::f64::consts::PI),
        ]);
        let e = mat_exp(&m).unwrap();
        let want = CMatrix::diag(&[C64::new(-1.0, 0.0), C64::new(-1.0, 0.0)]);
        assert!(close(&e, &want, 1e-14));
    }

    #[test]
    fn exp_matches_taylor_reference() {
        for seed in 0..6 {
            let m = random_matrix(3, seed, 1.5);
            let got = mat_exp(&m).unwrap();
            let want = taylor_exp(&m);
            let rel = got.sub_mat(&want).unwrap().norm_fro() / want.norm_fro();
            assert!(rel < 1e-11, "seed {seed}: relative error {rel:e}");
        }
    }

    #[test]
    fn exp_inverse_pairs() {
        for seed in 0..8 {
            let m = random_matrix(4, seed, 1.2);
            let prod = mat_exp(&m)
                .unwrap()
                .mul_mat(&mat_exp(&m.scale(C64::new(-1.0, 0.0))).unwrap())
                .unwrap();
            assert!(close(&prod, &CMatrix::identity(4), 1e-10));
        }
    }

    #[test]
    fn exp_handles_larger_norms() {
        let m = random_matrix(3, 11, 1.0).scale(C64::new(12.0, 0.0));
        let two = mat_exp(&m.scale(C64::new(0.5, 0.0))).unwrap();
        let whole = mat_exp(&m).unwrap();
        let rel =
            whole.sub_mat(&two.mul_mat(&two).unwrap()).unwrap().norm_fro() / whole.norm_fro();
        assert!(rel < 1e-11, "split consistency {rel:e}");
    }

    #[test]
    fn kron_of_identities() {
        let k = kron(&CMatrix::identity(2), &CMatrix::identity(3));
        assert!(close(&k, &CMatrix::identity(6), 0.0));
    }

    #[test]
    fn kron_mixed_product_rule() {
        for seed in 0..5 {
            let a = random_matrix(2, 4 * seed, 1.0);
            let b = random_matrix(2, 4 * seed + 1, 1.0);
            let c = random_matrix(2, 4 * seed + 2, 1.0);
            let d = random_matrix(2, 4 * seed + 3, 1.0);
            let lhs = kron(&a, &b).mul_mat(&kron(&c, &d)).unwrap();
            let rhs = kron(&a.mul_mat(&c).unwrap(), &b.mul_mat(&d).unwrap());
            assert!(close(&lhs, &rhs, 1e-12));
        }
    }

    #[test]
    fn kron_trace_is_multiplicative() {
        let a = random_matrix(3, 21, 1.0);
        let b = random_matrix(3, 22, 1.0);
        let lhs = kron(&a, &b).trace();
        let rhs = a.trace() * b.trace();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn ladder_for_qubits_is_sigma_pm() {
        let (jp, jm) = su2_ladder(2).unwrap();
        assert!(close(&jp, &CMatrix::unit(2, 1, 0), 1e-15));
        assert!(close(&jm, &jp.dagger(), 0.0));
    }

    #[test]
    fn ladder_power_traces() {
        // Tr((J+)^2 (J-)^2) = (2!)^2 in the three-dimensional representation.
        let (jp, jm) = su2_ladder(3).unwrap();
        let t = jp.pow(2).unwrap().mul_mat(&jm.pow(2).unwrap()).unwrap().trace();
        assert!((t - C64::new(4.0, 0.0)).norm() < 1e-12);
        // and Tr((J+)^N (J-)^k) vanishes for k != N
        for n in 1..4usize {
            let dim = n + 1;
            let (jp, jm) = su2_ladder(dim).unwrap();
            for k in 0..n {
                let t = jp.pow(n).unwrap().mul_mat(&jm.pow(k).unwrap()).unwrap().trace();
                assert!(t.norm() < 1e-13, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn ladder_commutator_is_twice_jz() {
        for dim in 2..6usize {
            let (jp, jm) = su2_ladder(dim).unwrap();
            let comm =
                jp.mul_mat(&jm).unwrap().sub_mat(&jm.mul_mat(&jp).unwrap()).unwrap();
            let j = (dim as f64 - 1.0) / 2.0;
            let jz = CMatrix::diag(
                &(0..dim).map(|k| C64::new(-j + k as f64, 0.0)).collect::<Vec<_>>(),
            );
            assert!(close(&comm, &jz.scale(C64::new(2.0, 0.0)), 1e-13));
        }
    }

    #[test]
    fn lu_inverse_and_det() {
        let m = random_matrix(5, 33, 1.0)
            .add_mat(&CMatrix::identity(5).scale(C64::new(2.0, 0.0)))
            .unwrap();
        let inv = m.inverse().unwrap();
        assert!(close(&m.mul_mat(&inv).unwrap(), &CMatrix::identity(5), 1e-11));
        let d = m.det().unwrap();
        let dinv = inv.det().unwrap();
        assert!((d * dinv - C64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn nilpotent_exp_terminates() {
        let (jp, _) = su2_ladder(4).unwrap();
        let e = mat_exp_nilpotent(&jp).expect("ladder matrices are nilpotent");
        let want = mat_exp(&jp).unwrap();
        assert!(close(&e, &want, 1e-13));
        assert!(nilpotent_power_table(&CMatrix::identity(3)).is_none());
    }

    #[test]
    fn serde_round_trip() {
        let m = random_matrix(3, 7, 1.0);
        let text = serde_json::to_string(&m).unwrap();
        let back: CMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn non_square_exp_is_rejected() {
        assert!(mat_exp(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn trivial_ladder_dimension_is_rejected() {
        assert!(su2_ladder(1).is_err());
        assert!(su2_ladder(0).is_err());
    }
}
