//! Dense complex linear algebra: Hermitian eigendecompositions, SVD-based
//! numerical rank, Kronecker products, partial traces, von Neumann entropy,
//! Schmidt rank and principal-minor sums.
//!
//! Everything is dense `Complex<f64>`; target sizes are small (inputs up to
//! ~16, composite spaces up to a few hundred). Matrices are immutable after
//! construction and every constructor rejects non-finite entries.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};
use thiserror::Error;

/// Iteration cap handed to the eigenvalue / SVD routines.
const MAX_ITERS: usize = 50_000;

/// Largest entry count `kron` is allowed to produce (256 MiB of complex
/// doubles); the bound is on the allocation, not the shape.
pub const MAX_KRON_ENTRIES: usize = 1 << 24;

#[derive(Debug, Error)]
pub enum NumError {
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },
    #[error("non-finite entry (NaN or infinity)")]
    NonFinite,
    #[error("kron result {rows}x{cols} exceeds the maximum of {max} entries")]
    DimensionOverflow { rows: usize, cols: usize, max: usize },
    #[error("matrix is not Hermitian: ||A - A*||_F = {residual:.3e} exceeds {tolerance:.3e}")]
    NonHermitianInput { residual: f64, tolerance: f64 },
    #[error("eigenvalue iteration failed to converge")]
    ConvergenceFailure,
    #[error("significantly negative eigenvalue {min_eigenvalue:.3e} in a putative density matrix")]
    SignificantNegativeEigenvalue { min_eigenvalue: f64 },
    #[error("zero vector has no Schmidt decomposition")]
    ZeroVector,
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl CMatrix {
    /// Builds a matrix from row-major entries, rejecting bad shapes and
    /// non-finite values.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self, NumError> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(NumError::ShapeMismatch {
                context: format!("{} entries for a {}x{} matrix", entries.len(), rows, cols),
            });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NumError::NonFinite);
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "zero-sized matrix");
        Self { rows, cols, entries: vec![Complex64::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        debug_assert!(m.is_finite());
        m
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Column vector from a slice of entries.
    pub fn column_vector(entries: Vec<Complex64>) -> Result<Self, NumError> {
        let n = entries.len();
        Self::new(n, 1, entries)
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

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn column(&self, j: usize) -> CMatrix {
        assert!(j < self.cols, "column index out of range");
        CMatrix::from_fn(self.rows, 1, |i, _| self[(i, j)])
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].conj())
    }

    pub fn scale(&self, s: f64) -> CMatrix {
        self.scale_c(Complex64::new(s, 0.0))
    }

    pub fn scale_c(&self, s: Complex64) -> CMatrix {
        CMatrix::from_fn(self.rows, self.cols, |i, j| s * self[(i, j)])
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square(), "trace of a non-square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn norm_fro(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hermitian part `(A + A*)/2`.
    pub fn hermitian_part(&self) -> CMatrix {
        assert!(self.is_square(), "hermitian part of a non-square matrix");
        CMatrix::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)].conj())
        })
    }

    /// `||A - A*||_F` for square `A`.
    pub fn hermitian_residual(&self) -> f64 {
        assert!(self.is_square(), "hermitian residual of a non-square matrix");
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Inner product `<self, other>` of two column vectors (conjugate-linear
    /// in `self`).
    pub fn inner(&self, other: &CMatrix) -> Complex64 {
        assert!(self.cols == 1 && other.cols == 1 && self.rows == other.rows, "inner product needs matching column vectors");
        (0..self.rows).map(|i| self[(i, 0)].conj() * other[(i, 0)]).sum()
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)])
    }
}

/// Rank-one projector / outer product `u v*`.
pub fn outer(u: &CMatrix, v: &CMatrix) -> CMatrix {
    assert!(u.cols == 1 && v.cols == 1, "outer product needs column vectors");
    CMatrix::from_fn(u.rows, v.rows, |i, j| u[(i, 0)] * v[(j, 0)].conj())
}

/// Largest entrywise absolute difference between two same-shaped matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert!(a.rows == b.rows && a.cols == b.cols, "shape mismatch");
    a.entries
        .iter()
        .zip(&b.entries)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.entries[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.entries[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "shape mismatch in +");
        CMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] + rhs[(i, j)])
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "shape mismatch in -");
        CMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - rhs[(i, j)])
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert!(self.cols == rhs.rows, "shape mismatch in *");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
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

#[derive(Serialize, Deserialize)]
struct CMatrixSerde {
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 2]>,
}

impl Serialize for CMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CMatrixSerde {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = CMatrixSerde::deserialize(deserializer)?;
        let entries = raw.entries.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        CMatrix::new(raw.rows, raw.cols, entries).map_err(serde::de::Error::custom)
    }
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, NumError> {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    if rows.checked_mul(cols).is_none_or(|n| n > MAX_KRON_ENTRIES) {
        return Err(NumError::DimensionOverflow { rows, cols, max: MAX_KRON_ENTRIES });
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        a[(i / b.rows, j / b.cols)] * b[(i % b.rows, j % b.cols)]
    }))
}

/// Which tensor factor `partial_trace` keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Partial trace of a square matrix on `C^{d_a} (x) C^{d_b}`, keeping the
/// requested factor. Index convention: row `i = i_a * d_b + i_b`.
pub fn partial_trace(m: &CMatrix, keep: Subsystem, d_a: usize, d_b: usize) -> Result<CMatrix, NumError> {
    if !m.is_square() || m.rows != d_a * d_b {
        return Err(NumError::ShapeMismatch {
            context: format!("partial trace of {}x{} with d_a={} d_b={}", m.rows, m.cols, d_a, d_b),
        });
    }
    match keep {
        Subsystem::First => Ok(CMatrix::from_fn(d_a, d_a, |a, ap| {
            (0..d_b).map(|b| m[(a * d_b + b, ap * d_b + b)]).sum()
        })),
        Subsystem::Second => Ok(CMatrix::from_fn(d_b, d_b, |b, bp| {
            (0..d_a).map(|a| m[(a * d_b + b, a * d_b + bp)]).sum()
        })),
    }
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues sorted descending,
/// eigenvector `k` in column `k`.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    /// `U diag(lambda) U*`, for residual checks.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.eigenvalues.len();
        let u = &self.eigenvectors;
        CMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| self.eigenvalues[k] * u[(i, k)] * u[(j, k)].conj()).sum()
        })
    }
}

/// Hermitian eigendecomposition. Rejects inputs whose anti-Hermitian part is
/// above `1e-8 * max(1, ||a||_F)`, then symmetrizes before decomposing.
pub fn hermitian_eig(a: &CMatrix) -> Result<HermitianEig, NumError> {
    if !a.is_square() {
        return Err(NumError::ShapeMismatch {
            context: format!("eigendecomposition of {}x{}", a.rows, a.cols),
        });
    }
    let tolerance = 1e-8 * a.norm_fro().max(1.0);
    let residual = a.hermitian_residual();
    if residual > tolerance {
        return Err(NumError::NonHermitianInput { residual, tolerance });
    }
    let sym = a.hermitian_part().to_nalgebra();
    let eig = sym
        .try_symmetric_eigen(f64::EPSILON, MAX_ITERS)
        .ok_or(NumError::ConvergenceFailure)?;
    let n = a.rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[q].partial_cmp(&eig.eigenvalues[p]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEig { eigenvalues, eigenvectors })
}

/// Singular values plus the numerical rank decision they imply.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    /// All singular values, descending.
    pub singular_values: Vec<f64>,
    /// Cutoff actually used: `max(rows, cols) * eps * sigma_max`. Values
    /// strictly above it count towards the rank.
    pub threshold: f64,
}

impl RankReport {
    /// True when the rank decision is fragile: the smallest counted singular
    /// value sits within a factor `band` of the cutoff, or is separated from
    /// the largest discarded one by less than a factor `band`. Exact zeros
    /// far below a healthy spectrum do not trigger this.
    pub fn is_borderline(&self, band: f64) -> bool {
        if self.threshold == 0.0 {
            return false;
        }
        let mut smallest_kept = f64::INFINITY;
        let mut largest_dropped = 0.0f64;
        for &s in &self.singular_values {
            if s > self.threshold {
                smallest_kept = smallest_kept.min(s);
            } else {
                largest_dropped = largest_dropped.max(s);
            }
        }
        if !smallest_kept.is_finite() {
            return false;
        }
        smallest_kept < band * self.threshold || band * largest_dropped >= smallest_kept
    }
}

/// Numerical rank from the SVD.
pub fn svd_rank(a: &CMatrix) -> Result<RankReport, NumError> {
    let svd = a
        .to_nalgebra()
        .try_svd(false, false, f64::EPSILON, MAX_ITERS)
        .ok_or(NumError::ConvergenceFailure)?;
    let mut singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    singular_values.sort_by(|p, q| q.partial_cmp(p).unwrap());
    let sigma_max = singular_values.first().copied().unwrap_or(0.0);
    let threshold = a.rows.max(a.cols) as f64 * f64::EPSILON * sigma_max;
    let rank = singular_values.iter().filter(|&&s| s > threshold).count();
    Ok(RankReport { rank, singular_values, threshold })
}

/// Von Neumann entropy in bits of a density matrix. Eigenvalues in
/// `[-1e-9, 0)` are clipped to zero; anything more negative is an error.
pub fn von_neumann_entropy(rho: &CMatrix) -> Result<f64, NumError> {
    let eig = hermitian_eig(rho)?;
    let min_eigenvalue = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if min_eigenvalue < -1e-9 {
        return Err(NumError::SignificantNegativeEigenvalue { min_eigenvalue });
    }
    let mut s = 0.0;
    for &l in &eig.eigenvalues {
        let l = l.clamp(0.0, 1.0);
        if l > 0.0 {
            s -= l * l.log2();
        }
    }
    Ok(s)
}

/// Schmidt rank of a bipartite vector on `C^{d_a} (x) C^{d_b}`: the numerical
/// rank of the `d_a x d_b` reshaping (row index = first factor).
pub fn schmidt_rank(v: &CMatrix, d_a: usize, d_b: usize) -> Result<RankReport, NumError> {
    if v.cols != 1 || v.rows != d_a * d_b {
        return Err(NumError::ShapeMismatch {
            context: format!("schmidt rank of {}x{} with d_a={} d_b={}", v.rows, v.cols, d_a, d_b),
        });
    }
    if v.norm_fro() == 0.0 {
        return Err(NumError::ZeroVector);
    }
    let reshaped = CMatrix::from_fn(d_a, d_b, |i, j| v[(i * d_b + j, 0)]);
    svd_rank(&reshaped)
}

/// Determinant by LU elimination with partial pivoting, on the submatrix of
/// `x` selected by `idx` (rows and columns alike).
fn principal_minor(x: &CMatrix, idx: &[usize]) -> f64 {
    let r = idx.len();
    let mut m = vec![Complex64::ZERO; r * r];
    for (p, &i) in idx.iter().enumerate() {
        for (q, &j) in idx.iter().enumerate() {
            m[p * r + q] = x[(i, j)];
        }
    }
    let mut det = Complex64::ONE;
    for col in 0..r {
        let pivot = (col..r).max_by(|&p, &q| {
            m[p * r + col].norm().partial_cmp(&m[q * r + col].norm()).unwrap()
        }).unwrap();
        if m[pivot * r + col].norm() == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..r {
                m.swap(col * r + j, pivot * r + j);
            }
            det = -det;
        }
        let diag = m[col * r + col];
        det *= diag;
        for row in col + 1..r {
            let factor = m[row * r + col] / diag;
            for j in col..r {
                let sub = factor * m[col * r + j];
                m[row * r + j] -= sub;
            }
        }
    }
    det.norm()
}

/// Sum of absolute determinants of all `r x r` principal submatrices. On a
/// positive semidefinite input this equals the elementary symmetric
/// polynomial `e_r` of the eigenvalues, so it is a continuous surrogate for
/// "rank at least r": it vanishes exactly when the rank is below `r`.
pub fn det_r(x: &CMatrix, r: usize) -> Result<f64, NumError> {
    if !x.is_square() || r == 0 || r > x.rows {
        return Err(NumError::ShapeMismatch {
            context: format!("det_r with r={} on {}x{}", r, x.rows, x.cols),
        });
    }
    let n = x.rows;
    let mut idx: Vec<usize> = (0..r).collect();
    let mut total = 0.0;
    loop {
        total += principal_minor(x, &idx);
        // next r-combination of 0..n in lexicographic order
        let mut k = r;
        loop {
            if k == 0 {
                return Ok(total);
            }
            k -= 1;
            if idx[k] != k + n - r {
                break;
            }
        }
        if idx[k] == k + n - r {
            return Ok(total);
        }
        idx[k] += 1;
        for j in k + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
