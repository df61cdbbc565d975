//! Dense complex matrices and the Hermitian kernel used throughout the crate.
//!
//! Everything here is sized for the small operators of the discrimination
//! problem (a few dozen rows at most). The eigensolver is a cyclic complex
//! Jacobi iteration, which is deterministic and accurate to a few ulps on
//! matrices of this size.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64 as C64;
use thiserror::Error;

/// Conjugate-symmetry tolerance for matrices declared Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues above `-PSD_SLACK` are treated as round-off and clipped to zero.
pub const PSD_SLACK: f64 = 1e-8;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: conjugate-symmetry residual {residual:e}")]
    NonHermitian { residual: f64 },
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:e}")]
    NotPsd { min_eigenvalue: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: String, right: String },
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major storage. Panics if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "storage length must be rows*cols");
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Returns `None` for ragged input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Option<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return None;
        }
        Some(Self::from_vec(r, c, rows.concat()))
    }

    /// Real matrix from nested rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// Matrix whose columns are the given vectors (all of length `rows`).
    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "column length mismatch");
            for (i, &x) in col.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        m
    }

    /// `|u><v|`
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
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

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<C64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        self.data.chunks(self.cols.max(1)).map(<[C64]>::to_vec).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// `max |A_ij - conj(A_ji)|`; infinite for non-square input.
    pub fn hermitian_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut r = 0.0_f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                r = r.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        r
    }

    /// `(A + A†) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    /// `A† B` without forming the adjoint.
    pub fn adjoint_mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.rows, other.rows, "adjoint_mul shape mismatch");
        let mut out = CMatrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self[(k, i)].conj();
                if a == ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `U† A U` for a square `A`.
    pub fn compress(&self, basis: &CMatrix) -> CMatrix {
        basis.adjoint_mul(&(self * basis))
    }

    /// `U A U†`
    pub fn embed(&self, basis: &CMatrix) -> CMatrix {
        &(basis * self) * &basis.adjoint()
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Tr(A B) without forming the product.
    pub fn trace_product(&self, other: &CMatrix) -> C64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut s = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                s += self[(i, k)] * other[(k, i)];
            }
        }
        s
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(-1.0)
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>10.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// `<u|v>`
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(C64::norm_sqr).sum::<f64>().sqrt()
}

/// Spectrum of a Hermitian matrix, eigenvalues ascending, eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    /// Eigenvalues at or below this are indistinguishable from zero.
    pub fn roundoff_floor(&self) -> f64 {
        let n = self.eigenvalues.len() as f64;
        let top = self.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        4.0 * n * f64::EPSILON * top
    }

    /// `sum sqrt(lambda_k)` over eigenvalues above the round-off floor.
    pub fn sqrt_eigenvalue_sum(&self) -> f64 {
        let floor = self.roundoff_floor();
        self.eigenvalues.iter().filter(|&&x| x > floor).map(|x| x.sqrt()).sum()
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.eigenvectors.column(k)
    }

    /// `V f(Λ) V†`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.eigenvectors.rows();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = self.eigenvectors[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vi * self.eigenvectors[(j, k)].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|x| x)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

fn check_hermitian(a: &CMatrix) -> Result<(), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let residual = a.hermitian_residual();
    if residual > HERMITIAN_TOL * a.max_abs().max(1.0) {
        return Err(LinalgError::NonHermitian { residual });
    }
    Ok(())
}

/// Hermitian eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues come back ascending. Each eigenvector is normalised so that its
/// first component of non-negligible magnitude is real and positive; exact
/// eigenvalue ties are ordered lexicographically on the eigenvector entries so
/// the output is reproducible.
pub fn eigh(a: &CMatrix) -> Result<EigenDecomposition, LinalgError> {
    check_hermitian(a)?;
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = CMatrix::identity(n);
    let scale = m.frobenius_norm();
    if n > 1 && scale > 0.0 {
        let threshold = f64::EPSILON * scale * 1e-2;
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += m[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= threshold {
                break;
            }

            for p in 0..n {
                for q in p + 1..n {
                    rotate(&mut m, &mut v, p, q);
                }
            }
        }
    }

    let mut pairs: Vec<(f64, Vec<C64>)> = (0..n)
        .map(|k| {
            let mut col = v.column(k);
            fix_phase(&mut col);
            (m[(k, k)].re, col)
        })
        .collect();
    pairs.sort_by(|(la, va), (lb, vb)| {
        la.partial_cmp(lb)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| lexicographic(va, vb))
    });
    let eigenvalues = pairs.iter().map(|(l, _)| *l).collect();
    let columns: Vec<Vec<C64>> = pairs.into_iter().map(|(_, c)| c).collect();
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: CMatrix::from_columns(n, &columns),
    })
}

fn lexicographic(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x
            .re
            .partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal));
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Rescales `v` by a unit phase so its first significant component is real positive.
pub fn fix_phase(v: &mut [C64]) {
    let largest = v.iter().map(|x| x.norm_sqr()).fold(0.0, f64::max);
    if largest == 0.0 {
        return;
    }
    if let Some(lead) = v.iter().find(|x| x.norm_sqr() > 1e-16 * largest).copied() {
        let phase = lead.conj() / lead.norm_sqr().sqrt();
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}

/// One Jacobi rotation annihilating `m[p][q]`; accumulates into `v`.
fn rotate(m: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let n = m.rows;
    let apq = m.data[p * n + q];
    let b = apq.norm_sqr().sqrt();
    if b == 0.0 {
        return;
    }
    let phase = apq / b; // e^{i phi}
    let app = m.data[p * n + p].re;
    let aqq = m.data[q * n + q].re;
    let zeta = (aqq - app) / (2.0 * b);
    let t = if zeta == 0.0 {
        1.0
    } else {
        zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // W = diag(1, e^{-i phi}) * [[c, s], [-s, c]] on the (p, q) plane.
    let ph = phase.conj();
    let w_qp = ph * (-s);
    let w_qq = ph * c;

    // columns: M <- M W, V <- V W
    for mat in [&mut m.data, &mut v.data] {
        for row in mat.chunks_exact_mut(n) {
            let xp = row[p];
            let xq = row[q];
            row[p] = xp * c + xq * w_qp;
            row[q] = xp * s + xq * w_qq;
        }
    }
    // rows: M <- W† M
    let (wqp_c, wqq_c) = (w_qp.conj(), w_qq.conj());
    for k in 0..n {
        let xp = m.data[p * n + k];
        let xq = m.data[q * n + k];
        m.data[p * n + k] = xp * c + wqp_c * xq;
        m.data[q * n + k] = xp * s + wqq_c * xq;
    }
    m.data[p * n + q] = ZERO;
    m.data[q * n + p] = ZERO;
    m.data[p * n + p].im = 0.0;
    m.data[q * n + q].im = 0.0;
}

/// Principal square root of a positive-semidefinite matrix.
pub fn sqrt_psd(a: &CMatrix) -> Result<CMatrix, LinalgError> {
    let eig = eigh(a)?;
    let min = eig.min_eigenvalue();
    if min < -PSD_SLACK {
        return Err(LinalgError::NotPsd { min_eigenvalue: min });
    }
    let floor = eig.roundoff_floor();
    Ok(eig.map(|x| if x > floor { x.sqrt() } else { 0.0 }).hermitian_part())
}

/// Sum of singular values, computed as `Tr sqrt(A† A)`.
pub fn trace_norm(a: &CMatrix) -> Result<f64, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let gram = a.adjoint_mul(a).hermitian_part();
    Ok(eigh(&gram)?.sqrt_eigenvalue_sum())
}

/// Frobenius-nearest positive-semidefinite matrix (negative eigenvalues clipped).
pub fn project_psd(a: &CMatrix) -> Result<CMatrix, LinalgError> {
    let eig = eigh(a)?;
    Ok(eig.map(|x| x.max(0.0)).hermitian_part())
}

/// Gram–Schmidt over `vectors` in order, dropping any whose residual norm is
/// below `tol`. Runs two passes per vector for orthogonality to round-off.
pub fn orthonormalize(vectors: &[Vec<C64>], tol: f64) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &w);
                for (x, y) in w.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let nrm = norm(&w);
        if nrm > tol {
            for x in w.iter_mut() {
                *x /= nrm;
            }
            basis.push(w);
        }
    }
    basis
}

/// Orthonormal columns spanning the eigenspace of `a` with eigenvalues above `threshold`.
pub fn range_basis(a: &CMatrix, threshold: f64) -> Result<CMatrix, LinalgError> {
    let eig = eigh(a)?;
    let cols: Vec<Vec<C64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > threshold)
        .map(|(k, _)| eig.vector(k))
        .collect();
    Ok(CMatrix::from_columns(a.rows(), &cols))
}

/// `‖A - B‖_F`
pub fn distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).frobenius_norm()
}
