//! Dense real linear algebra for desk-scale problems.
//!
//! Everything here is small and dense: vectors with a selectable norm,
//! row-major matrices, and a one-sided Jacobi SVD used for minimal-norm
//! solves and singular values. Dimensions are expected to stay well below a
//! thousand.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 80;

/// Exact subordinate norms from `LInf` into `L2` enumerate the cube vertices;
/// above this many columns an upper bound is returned instead.
const MAX_VERTEX_ENUMERATION: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is rank deficient: numerical rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },
    #[error("ragged matrix: row {row} has {found} entries, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("non-finite entry encountered")]
    NonFinite,
    #[error("empty vector or matrix")]
    Empty,
}

/// Which norm a space carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormTag {
    #[default]
    L2,
    LInf,
}

impl fmt::Display for NormTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormTag::L2 => f.write_str("l2"),
            NormTag::LInf => f.write_str("linf"),
        }
    }
}

/// A real column vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    /// Wraps the entries, rejecting empty input and NaN/Inf.
    pub fn try_from_vec(entries: Vec<f64>) -> Result<Self, LinalgError> {
        if entries.is_empty() {
            return Err(LinalgError::Empty);
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Vector(entries))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self, tag: NormTag) -> f64 {
        norm(self, tag)
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|v| v * factor).collect())
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "vector dimension mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + factor * b).collect())
    }

    pub fn distance(&self, other: &Vector, tag: NormTag) -> f64 {
        (self - other).norm(tag)
    }
}

impl From<Vec<f64>> for Vector {
    fn from(entries: Vec<f64>) -> Self {
        Vector(entries)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl<'a> Add<&'a Vector> for &'a Vector {
    type Output = Vector;
    fn add(self, rhs: &'a Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl<'a> Sub<&'a Vector> for &'a Vector {
    type Output = Vector;
    fn sub(self, rhs: &'a Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

/// ℓ2 or ℓ∞ norm.
pub fn norm(v: &Vector, tag: NormTag) -> f64 {
    match tag {
        NormTag::L2 => v.0.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormTag::LInf => v.0.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let first = rows.first().ok_or(LinalgError::Empty)?;
        let cols = first.len();
        if cols == 0 {
            return Err(LinalgError::Empty);
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (row, entries) in rows.iter().enumerate() {
            if entries.len() != cols {
                return Err(LinalgError::Ragged { row, expected: cols, found: entries.len() });
            }
            data.extend_from_slice(entries);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &Vector) -> Vector {
        assert_eq!(self.cols, x.dim(), "matrix-vector dimension mismatch");
        Vector((0..self.rows).map(|i| self.row(i).iter().zip(x.iter()).map(|(a, b)| a * b).sum()).collect())
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matrix-matrix dimension mismatch");
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
        out
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * factor).collect() }
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// One-sided (Hestenes) Jacobi on a tall matrix: rotates columns of `a`
/// until mutually orthogonal, accumulating the rotations in `v`.
/// Returns the rotated matrix and `v` with columns sorted by decreasing norm.
fn jacobi_orthogonalize(mut a: Matrix) -> (Matrix, Matrix) {
    let n = a.cols;
    let mut v = Matrix::identity(n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..a.rows {
                    let (ap, aq) = (a[(i, p)], a[(i, q)]);
                    alpha += ap * ap;
                    beta += aq * aq;
                    gamma += ap * aq;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                for i in 0..a.rows {
                    let (ap, aq) = (a[(i, p)], a[(i, q)]);
                    a[(i, p)] = c * ap - s * aq;
                    a[(i, q)] = s * ap + c * aq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    // reorder by decreasing column norm, permuting v identically
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm(NormTag::L2)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut sorted_a = Matrix::zeros(a.rows, n);
    let mut sorted_v = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..a.rows {
            sorted_a[(i, dst)] = a[(i, src)];
        }
        for i in 0..n {
            sorted_v[(i, dst)] = v[(i, src)];
        }
    }
    (sorted_a, sorted_v)
}

/// All singular values of `a`, in decreasing order (`min(rows, cols)` of them).
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let tall = if a.rows >= a.cols { a.clone() } else { a.transpose() };
    let (rotated, _) = jacobi_orthogonalize(tall);
    (0..rotated.cols).map(|j| rotated.column(j).norm(NormTag::L2)).collect()
}

/// Thin SVD of a wide matrix `B` (m×n, m ≤ n) written as `B = V Σ Wᵀ`,
/// with `V` m×m orthogonal and `W` n×m with orthonormal columns.
///
/// Built once and reused for every minimal-norm solve against the same `B`.
#[derive(Debug, Clone)]
pub struct RowSpaceSvd {
    left: Matrix,
    sigma: Vec<f64>,
    right: Matrix,
}

impl RowSpaceSvd {
    /// Factors `b`; fails with `RankDeficient` unless all `m` singular values
    /// exceed `RANK_TOL * σ_max`.
    pub fn new(b: &Matrix) -> Result<Self, LinalgError> {
        let (m, n) = (b.rows, b.cols);
        if m > n {
            return Err(LinalgError::RankDeficient { rank: n, required: m });
        }
        let (rotated, left) = jacobi_orthogonalize(b.transpose());
        let sigma: Vec<f64> = (0..m).map(|j| rotated.column(j).norm(NormTag::L2)).collect();
        let sigma_max = sigma.first().copied().unwrap_or(0.0);
        let rank = sigma.iter().filter(|&&s| s > RANK_TOL * sigma_max && s > 0.0).count();
        if rank < m {
            return Err(LinalgError::RankDeficient { rank, required: m });
        }
        let mut right = rotated;
        for (j, s) in sigma.iter().enumerate() {
            for i in 0..n {
                right[(i, j)] /= s;
            }
        }
        Ok(RowSpaceSvd { left, sigma, right })
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn smallest_singular_value(&self) -> f64 {
        *self.sigma.last().expect("factor of a non-empty matrix")
    }

    /// Minimal ℓ2-norm solution of `B x = y`, i.e. `W Σ⁻¹ Vᵀ y`.
    pub fn solve(&self, y: &Vector) -> Result<Vector, LinalgError> {
        let m = self.sigma.len();
        if y.dim() != m {
            return Err(LinalgError::DimensionMismatch { expected: m, found: y.dim() });
        }
        let coeffs: Vec<f64> =
            (0..m).map(|j| (0..m).map(|i| self.left[(i, j)] * y[i]).sum::<f64>() / self.sigma[j]).collect();
        let n = self.right.rows;
        Ok(Vector((0..n).map(|i| (0..m).map(|j| self.right[(i, j)] * coeffs[j]).sum()).collect()))
    }
}

/// Minimal ℓ2-norm solution of an underdetermined, full-row-rank system.
pub fn min_norm_solve(b: &Matrix, y: &Vector) -> Result<Vector, LinalgError> {
    if y.dim() != b.rows {
        return Err(LinalgError::DimensionMismatch { expected: b.rows, found: y.dim() });
    }
    RowSpaceSvd::new(b)?.solve(y)
}

/// The `rows`-th largest singular value of `b`; zero when `b` has more rows
/// than columns.
pub fn smallest_singular_value(b: &Matrix) -> f64 {
    if b.rows > b.cols {
        return 0.0;
    }
    *singular_values(b).last().unwrap_or(&0.0)
}

/// Operator norm of `a` as a map from `(R^cols, from)` to `(R^rows, to)`.
///
/// `LInf → L2` is exact up to 20 columns (vertex enumeration); beyond that it
/// returns the upper bound `‖(Σ_j |a_ij|)_i‖₂`.
pub fn operator_norm(a: &Matrix, from: NormTag, to: NormTag) -> f64 {
    match (from, to) {
        (NormTag::L2, NormTag::L2) => singular_values(a).first().copied().unwrap_or(0.0),
        (NormTag::LInf, NormTag::LInf) => {
            (0..a.rows).map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
        }
        (NormTag::L2, NormTag::LInf) => {
            (0..a.rows).map(|i| a.row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max)
        }
        (NormTag::LInf, NormTag::L2) => {
            let n = a.cols;
            if n > MAX_VERTEX_ENUMERATION {
                return (0..a.rows).map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>().powi(2)).sum::<f64>().sqrt();
            }
            // ±s give the same image norm, so fix the sign of the last column
            let mut best = 0.0_f64;
            for mask in 0u64..(1u64 << (n - 1)) {
                let mut acc = 0.0;
                for i in 0..a.rows {
                    let row = a.row(i);
                    let mut dot = row[n - 1];
                    for (j, v) in row.iter().take(n - 1).enumerate() {
                        dot += if mask >> j & 1 == 1 { -v } else { *v };
                    }
                    acc += dot * dot;
                }
                best = best.max(acc);
            }
            best.sqrt()
        }
    }
}

/// Central-difference Jacobian of `f` at `x` with step `h`.
pub fn finite_diff_jacobian<F>(f: F, x: &Vector, h: f64) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let n = x.dim();
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[j] += h;
        minus[j] -= h;
        let diff = &f(&plus) - &f(&minus);
        columns.push(diff.scaled(0.5 / h));
    }
    let m = columns.first().map_or(0, Vector::dim);
    let mut jac = Matrix::zeros(m, n);
    for (j, col) in columns.iter().enumerate() {
        for i in 0..m {
            jac[(i, j)] = col[i];
        }
    }
    jac
}

/// Orthonormalizes the columns of `a` (m×k, k ≤ m) with two passes of
/// modified Gram-Schmidt.
pub fn orthonormalize_columns(a: &Matrix) -> Result<Matrix, LinalgError> {
    let mut q = a.clone();
    for _pass in 0..2 {
        for j in 0..q.cols {
            for p in 0..j {
                let proj: f64 = (0..q.rows).map(|i| q[(i, p)] * q[(i, j)]).sum();
                for i in 0..q.rows {
                    q[(i, j)] -= proj * q[(i, p)];
                }
            }
            let len = q.column(j).norm(NormTag::L2);
            if len <= RANK_TOL {
                return Err(LinalgError::RankDeficient { rank: j, required: q.cols });
            }
            for i in 0..q.rows {
                q[(i, j)] /= len;
            }
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from(x.to_vec())
    }

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&v(&[3.0, 4.0]), NormTag::L2), 5.0);
        assert_eq!(norm(&v(&[3.0, -4.0]), NormTag::LInf), 4.0);
        assert_eq!(norm(&v(&[0.0, 0.0, 0.0]), NormTag::L2), 0.0);
    }

    #[test]
    fn min_norm_solve_scaled_identity() {
        let x = min_norm_solve(&m(&[&[2.0, 0.0], &[0.0, 2.0]]), &v(&[1.0, 1.0])).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn min_norm_solve_line_matches_grid_search() {
        // oracle: walk the solution line x = (t, 2 - t) and keep the shortest point
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=400_000 {
            let t = -1.0 + 4.0 * k as f64 / 400_000.0;
            let len = (t * t + (2.0 - t) * (2.0 - t)).sqrt();
            if len < best.0 {
                best = (len, t);
            }
        }
        assert!((best.1 - 1.0).abs() < 1e-5);
        let x = min_norm_solve(&m(&[&[1.0, 1.0]]), &v(&[2.0])).unwrap();
        assert!((x[0] - best.1).abs() < 1e-5 && (x[1] - (2.0 - best.1)).abs() < 1e-5);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn min_norm_solve_rejects_rank_deficient() {
        let err = min_norm_solve(&m(&[&[1.0, 0.0], &[0.0, 0.0]]), &v(&[1.0, 0.0])).unwrap_err();
        assert_eq!(err, LinalgError::RankDeficient { rank: 1, required: 2 });
    }

    #[test]
    fn min_norm_solve_rejects_tall() {
        assert!(matches!(
            min_norm_solve(&m(&[&[1.0], &[2.0]]), &v(&[1.0, 2.0])),
            Err(LinalgError::RankDeficient { .. })
        ));
    }

    #[test]
    fn smallest_singular_value_examples() {
        assert!((smallest_singular_value(&m(&[&[3.0, 0.0], &[0.0, 1.0]])) - 1.0).abs() < 1e-14);
        assert!((smallest_singular_value(&m(&[&[0.0, 1.0], &[1.0, 0.0]])) - 1.0).abs() < 1e-14);
        assert!((smallest_singular_value(&m(&[&[2.0, 0.0, 0.0], &[0.0, 0.5, 0.0]])) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn smallest_singular_value_sampled_oracle() {
        // σ_min of a wide B equals min over unit y of max_{‖x‖≤1} (y·Bx) = min ‖Bᵀy‖
        let b = m(&[&[2.0, 0.0, 0.0], &[0.0, 0.5, 0.0]]);
        let bt = b.transpose();
        let mut best = f64::INFINITY;
        for k in 0..100_000 {
            let theta = std::f64::consts::TAU * k as f64 / 100_000.0;
            let y = v(&[theta.cos(), theta.sin()]);
            best = best.min(bt.mul_vec(&y).norm(NormTag::L2));
        }
        assert!((best - 0.5).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_identity_and_square() {
        let x = v(&[0.3, -1.2, 2.0]);
        let jac = finite_diff_jacobian(|z| z.clone(), &x, 1e-5);
        assert!(jac.max_abs_diff(&Matrix::identity(3)) < 1e-9);
        let sq = finite_diff_jacobian(|z| v(&[z[0] * z[0]]), &v(&[1.0]), 1e-5);
        assert!((sq[(0, 0)] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn operator_norms_against_definitions() {
        let a = m(&[&[1.0, -2.0], &[3.0, 0.5]]);
        assert!((operator_norm(&a, NormTag::LInf, NormTag::LInf) - 3.5).abs() < 1e-15);
        let row_l2 = (9.0_f64 + 0.25).sqrt();
        assert!((operator_norm(&a, NormTag::L2, NormTag::LInf) - row_l2).abs() < 1e-15);
        // vertices (1,1) and (1,-1): images (-1, 3.5) and (3, 2.5)
        let vertex = (9.0_f64 + 6.25).sqrt();
        assert!((operator_norm(&a, NormTag::LInf, NormTag::L2) - vertex).abs() < 1e-14);
        let sv = singular_values(&a);
        assert!((operator_norm(&a, NormTag::L2, NormTag::L2) - sv[0]).abs() < 1e-15);
        // Frobenius identity
        let fro: f64 = 1.0 + 4.0 + 9.0 + 0.25;
        assert!((sv[0] * sv[0] + sv[1] * sv[1] - fro).abs() < 1e-12);
    }

    #[test]
    fn orthonormalize_produces_orthonormal_columns() {
        let a = m(&[&[1.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]]);
        let q = orthonormalize_columns(&a).unwrap();
        let gram = q.transpose().matmul(&q);
        assert!(gram.max_abs_diff(&Matrix::identity(2)) < 1e-15);
    }

    #[test]
    fn try_from_vec_rejects_non_finite() {
        assert_eq!(Vector::try_from_vec(vec![1.0, f64::NAN]), Err(LinalgError::NonFinite));
        assert_eq!(Vector::try_from_vec(vec![]), Err(LinalgError::Empty));
    }
}
