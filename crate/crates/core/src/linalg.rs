//! Dense linear algebra for the small matrices that appear in constrained
//! estimation: symmetric eigendecomposition (cyclic Jacobi), rank-truncated
//! Moore-Penrose pseudoinverse, and the orthogonal projection onto the
//! kernel of a constraint matrix.
//!
//! Norms on matrices are Frobenius norms unless stated otherwise.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut, Index, IndexMut};

use crate::error::{Error, Result};

const MAX_JACOBI_SWEEPS: usize = 100;

/// Relative singular-value threshold used to decide the numerical rank of a
/// constraint matrix.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Relative eigenvalue floor for [`pinv_truncated`].
pub const PINV_FLOOR: f64 = 1e-10;

/// A real vector with finite entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Builds a vector, rejecting NaN and infinite entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector entries"));
        }
        Ok(Self(entries))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl From<&[f64]> for Vector {
    fn from(s: &[f64]) -> Self {
        Self(s.to_vec())
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Dimension {
                context: "matrix entries",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension {
                    context: "matrix row length",
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    /// A matrix with no rows and `cols` columns (an empty constraint).
    pub fn empty_rows(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        let mut m = Self::zeros(u.len(), v.len());
        for (i, &ui) in u.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                m[(i, j)] = ui * vj;
            }
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                context: "matrix product",
                expected: self.cols,
                actual: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vector> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out)?;
        Ok(Vector(out))
    }

    /// `out = self * x` without allocating.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.cols || out.len() != self.rows {
            return Err(Error::Dimension {
                context: "matrix-vector product",
                expected: self.cols,
                actual: x.len(),
            });
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
        Ok(())
    }

    /// Quadratic form `xᵀ self x`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(x, &self.mul_vec(x)?))
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension {
                context: "elementwise matrix operation",
                expected: self.rows * self.cols,
                actual: other.rows * other.cols,
            });
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Largest absolute entry-wise deviation from symmetry.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.rows {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Eigenvalues sorted descending with the matching orthonormal eigenvectors
/// stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    /// `U diag(f(λ)) Uᵀ` over the first `k` eigenpairs.
    pub fn spectral_sum(&self, k: usize, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.vectors.rows();
        let mut out = Matrix::zeros(n, n);
        for idx in 0..k {
            let w = f(self.values[idx]);
            for i in 0..n {
                let ui = self.vectors[(i, idx)] * w;
                if ui == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += ui * self.vectors[(j, idx)];
                }
            }
        }
        out.symmetrized()
    }

    pub fn reconstruct(&self) -> Matrix {
        self.spectral_sum(self.values.len(), |l| l)
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized as `(A + Aᵀ)/2`; inputs whose asymmetry exceeds
/// `1e-8 · max(1, ‖A‖)` are rejected.
pub fn symmetric_eigen(a: &Matrix) -> Result<EigenDecomposition> {
    if !a.is_square() {
        return Err(Error::Dimension {
            context: "symmetric_eigen requires a square matrix",
            expected: a.rows(),
            actual: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("symmetric_eigen input"));
    }
    let scale = a.frobenius_norm();
    if a.asymmetry() > 1e-8 * scale.max(1.0) {
        return Err(Error::Data("symmetric_eigen input is not symmetric"));
    }
    let n = a.rows();
    let mut m = a.symmetrized();
    let mut v = Matrix::identity(n);

    let mut converged = false;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if libm::sqrt(off) <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::hypot(theta, 1.0))
                } else {
                    -1.0 / (-theta + libm::hypot(theta, 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "Jacobi eigenvalue sweep",
            iterations: MAX_JACOBI_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, new_col)] = v[(k, old_col)];
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix keeping the `rank`
/// largest eigenpairs: `Σ_{i<rank} λ_i⁻¹ u_i u_iᵀ`.
///
/// Each retained eigenvalue must exceed `1e-10 · λ_max`.
pub fn pinv_truncated(a: &Matrix, rank: usize) -> Result<Matrix> {
    let eig = symmetric_eigen(a)?;
    pinv_from_eigen(&eig, rank)
}

pub fn pinv_from_eigen(eig: &EigenDecomposition, rank: usize) -> Result<Matrix> {
    let n = eig.values.len();
    if rank > n {
        return Err(Error::Dimension {
            context: "pseudoinverse rank",
            expected: n,
            actual: rank,
        });
    }
    let lambda_max = eig.values.first().copied().unwrap_or(0.0);
    let floor = PINV_FLOOR * lambda_max;
    for i in 0..rank {
        let l = eig.values[i];
        if lambda_max <= 0.0 || l <= floor {
            return Err(Error::RankDeficient {
                requested: rank,
                eigenvalue: l,
                previous: if i == 0 { l } else { eig.values[i - 1] },
                floor,
            });
        }
    }
    Ok(eig.spectral_sum(rank, |l| 1.0 / l))
}

/// Inverse of a symmetric positive definite matrix via its eigendecomposition.
///
/// Fails with [`Error::NotIdentified`] when the smallest eigenvalue is not
/// above `rel_floor · λ_max`.
pub fn inverse_spd(a: &Matrix, rel_floor: f64) -> Result<Matrix> {
    let eig = symmetric_eigen(a)?;
    let n = eig.values.len();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let max = eig.values[0];
    let min = eig.values[n - 1];
    if max <= 0.0 || min <= rel_floor * max {
        return Err(Error::NotIdentified("matrix is not numerically positive definite"));
    }
    Ok(eig.spectral_sum(n, |l| 1.0 / l))
}

/// Orthogonal projection onto `Ker(B)` together with the minimum-norm point
/// of the affine set `{θ : Bθ = b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub projection: Matrix,
    pub offset: Vector,
    /// Rank of the projection (`p` minus the numerical rank of `B`).
    pub rank: usize,
}

/// Builds `P = I − Bᵀ(BBᵀ)⁻B`, `c = Bᵀ(BBᵀ)⁻b` and `d = p − rank(B)`.
///
/// The row space of `B` is found with a one-sided Jacobi SVD of `Bᵀ`, so
/// singular values far below `sqrt(ε)·σ_max` are resolved and the numerical
/// rank counts singular values above `1e-10 · σ_max`.
pub fn build_projection(b_mat: &Matrix, b: &[f64]) -> Result<Projection> {
    let p = b_mat.cols();
    let m = b_mat.rows();
    if b.len() != m {
        return Err(Error::Dimension {
            context: "constraint right-hand side",
            expected: m,
            actual: b.len(),
        });
    }
    if !b_mat.is_finite() || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("constraint"));
    }

    let svd = one_sided_jacobi(&b_mat.transpose())?;
    let sigma_max = svd.singular.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..m)
        .filter(|&j| sigma_max > 0.0 && svd.singular[j] > RANK_TOLERANCE * sigma_max)
        .collect();

    let mut projection = Matrix::identity(p);
    let mut offset = vec![0.0; p];
    for &j in &kept {
        let sigma = svd.singular[j];
        let u: Vec<f64> = (0..p).map(|i| svd.left[(i, j)] / sigma).collect();
        // Vᵀb restricted to component j.
        let vb: f64 = (0..m).map(|k| svd.right[(k, j)] * b[k]).sum();
        for i in 0..p {
            offset[i] += u[i] * vb / sigma;
            for l in 0..p {
                projection[(i, l)] -= u[i] * u[l];
            }
        }
    }
    let projection = projection.symmetrized();

    let residual: Vec<f64> = (0..m)
        .map(|i| dot(b_mat.row(i), &offset) - b[i])
        .collect();
    let res = norm(&residual);
    if res > 1e-8 * norm(b).max(1.0) {
        return Err(Error::Infeasible { residual: res });
    }

    Ok(Projection {
        projection,
        offset: Vector(offset),
        rank: p - kept.len(),
    })
}

struct Svd {
    /// Columns are `σ_j u_j`.
    left: Matrix,
    singular: Vec<f64>,
    right: Matrix,
}

/// One-sided (Hestenes) Jacobi: orthogonalizes the columns of `a` so that
/// `a V = [σ_1 u_1, …]`.
fn one_sided_jacobi(a: &Matrix) -> Result<Svd> {
    let rows = a.rows();
    let n = a.cols();
    let mut u = a.clone();
    let mut v = Matrix::identity(n);
    let mut converged = n < 2;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..rows {
                    let x = u[(k, i)];
                    let y = u[(k, j)];
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + libm::hypot(zeta, 1.0))
                } else {
                    -1.0 / (-zeta + libm::hypot(zeta, 1.0))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for k in 0..rows {
                    let x = u[(k, i)];
                    let y = u[(k, j)];
                    u[(k, i)] = c * x - s * y;
                    u[(k, j)] = s * x + c * y;
                }
                for k in 0..n {
                    let x = v[(k, i)];
                    let y = v[(k, j)];
                    v[(k, i)] = c * x - s * y;
                    v[(k, j)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "one-sided Jacobi SVD",
            iterations: MAX_JACOBI_SWEEPS,
        });
    }
    let singular = (0..n).map(|j| norm(&u.column(j))).collect();
    Ok(Svd {
        left: u,
        singular,
        right: v,
    })
}
