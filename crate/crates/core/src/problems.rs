//! Concrete instances.
//!
//! The main family is the quadratic operator equation
//! `A(x, x) + Bx + C = 0` with a symmetric bilinear `A`, a surjective `B` and
//! constants `‖A(x1, x2)‖ ≤ a‖x1‖‖x2‖`, `b` (covering constant of `B`) and
//! `c = ‖C‖`. It is solvable whenever `D = b² − 4ac ≥ 0`, and rewriting it as
//! `Φ(x) = A(x, x) + C`, `Ψ(x) = −Bx` with `ψ(τ) = bτ`, `φ(τ) = aτ² + c`
//! puts it in the form the solver handles, with `τ* = (b − √D)/(2a)`.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::covering::{CoveringError, CoveringMap, IdentityCovering, LinearSurjectiveCovering, Sign};
use crate::exec::{map_indexed, trial_rng, Execution};
use crate::linalg::{
    orthonormalize_columns, singular_values, smallest_singular_value, LinalgError, Matrix, NormTag, Vector,
};
use crate::majorant::{MajorantError, MajorantPair, Radius, ScalarFn};
use crate::maps::SmoothMap;
use crate::sampling::unit_direction;
use crate::solver::{ProblemInstance, SolveError};

/// Random pairs used to check a claimed bilinear bound.
pub const BOUND_SAMPLES: usize = 1000;
/// Relative slack on the sampled bilinear bound.
pub const BOUND_REL_TOL: f64 = 1e-9;
/// Discriminants with `|D| ≤ DISCRIMINANT_TOL·b²` are treated as zero.
pub const DISCRIMINANT_TOL: f64 = 1e-12;
/// Relative tolerance on `c = ‖C‖`.
pub const CONSTANT_TOL: f64 = 1e-12;
/// Slack on `b ≤ σ_min(B)` for Euclidean norms.
pub const COVERING_CONSTANT_TOL: f64 = 1e-9;

const BOUND_SEED: u64 = 0xb111_73a5;

#[derive(Debug, Error, Clone)]
pub enum ProblemError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("tensor is not symmetric: T[{k}][{i}][{j}] ≠ T[{k}][{j}][{i}]")]
    NotSymmetric { k: usize, i: usize, j: usize },
    #[error("bilinear bound a = {claimed} is exceeded by a sampled ratio {observed}")]
    BoundViolated { claimed: f64, observed: f64 },
    #[error("NegativeDiscriminant: D = b² − 4ac = {0} < 0")]
    NegativeDiscriminant(f64),
    #[error("c = {claimed} does not match ‖C‖ = {actual}")]
    OffsetNorm { claimed: f64, actual: f64 },
    #[error("b = {claimed} exceeds the covering constant σ_min(B) = {sigma_min}")]
    CoveringConstant { claimed: f64, sigma_min: f64 },
    #[error("invalid constant: {0}")]
    InvalidConstant(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
    #[error(transparent)]
    Majorant(#[from] MajorantError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// A symmetric bilinear map `A: R^n × R^n → R^m` stored as `T[k][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearMap {
    dim_x: usize,
    dim_y: usize,
    coeffs: Vec<f64>,
    bound: f64,
    norms: (NormTag, NormTag),
}

impl BilinearMap {
    /// Flat coefficients in `k, i, j` order with a claimed bound `a`.
    ///
    /// Symmetry must hold exactly; the bound is checked on
    /// [`BOUND_SAMPLES`] random pairs.
    pub fn new(
        dim_y: usize,
        dim_x: usize,
        coeffs: Vec<f64>,
        a: f64,
        norms: (NormTag, NormTag),
    ) -> Result<Self, ProblemError> {
        if dim_x == 0 || dim_y == 0 || coeffs.len() != dim_y * dim_x * dim_x {
            return Err(ProblemError::DimensionMismatch(format!(
                "{} coefficients for a {dim_y}×{dim_x}×{dim_x} tensor",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(LinalgError::NonFinite.into());
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(ProblemError::InvalidConstant(format!("a = {a}")));
        }
        let map = BilinearMap { dim_x, dim_y, coeffs, bound: a, norms };
        map.check_symmetric()?;
        let observed = map.sampled_ratio(BOUND_SAMPLES, BOUND_SEED, Execution::default());
        if observed > a * (1.0 + BOUND_REL_TOL) {
            return Err(ProblemError::BoundViolated { claimed: a, observed });
        }
        Ok(map)
    }

    /// Nested `T[k][i][j]` with the certified bound computed from the slices.
    pub fn from_nested_certified(tensor: &[Vec<Vec<f64>>], norms: (NormTag, NormTag)) -> Result<Self, ProblemError> {
        let (dim_y, dim_x, coeffs) = flatten(tensor)?;
        let a = certified_bound(dim_y, dim_x, &coeffs, norms);
        Self::new(dim_y, dim_x, coeffs, a, norms)
    }

    pub fn from_nested(tensor: &[Vec<Vec<f64>>], a: f64, norms: (NormTag, NormTag)) -> Result<Self, ProblemError> {
        let (dim_y, dim_x, coeffs) = flatten(tensor)?;
        Self::new(dim_y, dim_x, coeffs, a, norms)
    }

    fn check_symmetric(&self) -> Result<(), ProblemError> {
        for k in 0..self.dim_y {
            for i in 0..self.dim_x {
                for j in i + 1..self.dim_x {
                    if self.at(k, i, j) != self.at(k, j, i) {
                        return Err(ProblemError::NotSymmetric { k, i, j });
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest sampled `‖A(x1, x2)‖ / (‖x1‖‖x2‖)` over unit pairs.
    pub fn sampled_ratio(&self, samples: usize, seed: u64, exec: Execution) -> f64 {
        let (nx, ny) = self.norms;
        map_indexed(samples, exec, |i| {
            let mut rng = trial_rng(seed, i);
            let x1 = unit_direction(&mut rng, self.dim_x, nx);
            let x2 = unit_direction(&mut rng, self.dim_x, nx);
            self.apply_unchecked(&x1, &x2).norm(ny) / (x1.norm(nx) * x2.norm(nx))
        })
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn at(&self, k: usize, i: usize, j: usize) -> f64 {
        self.coeffs[(k * self.dim_x + i) * self.dim_x + j]
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn norms(&self) -> (NormTag, NormTag) {
        self.norms
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.dim_y)
            .map(|k| (0..self.dim_x).map(|i| (0..self.dim_x).map(|j| self.at(k, i, j)).collect()).collect())
            .collect()
    }

    /// `A(x1, x2)_k = Σ_{i,j} T[k][i][j]·x1[i]·x2[j]`.
    pub fn apply(&self, x1: &Vector, x2: &Vector) -> Result<Vector, ProblemError> {
        if x1.dim() != self.dim_x || x2.dim() != self.dim_x {
            return Err(ProblemError::DimensionMismatch(format!(
                "arguments of length {} and {} for dimension {}",
                x1.dim(),
                x2.dim(),
                self.dim_x
            )));
        }
        Ok(self.apply_unchecked(x1, x2))
    }

    fn apply_unchecked(&self, x1: &Vector, x2: &Vector) -> Vector {
        let n = self.dim_x;
        Vector::from(
            (0..self.dim_y)
                .map(|k| {
                    let slice = &self.coeffs[k * n * n..(k + 1) * n * n];
                    (0..n)
                        .map(|i| {
                            let row = &slice[i * n..(i + 1) * n];
                            x1[i] * row.iter().zip(x2.iter()).map(|(t, v)| t * v).sum::<f64>()
                        })
                        .sum()
                })
                .collect::<Vec<_>>(),
        )
    }

    /// The matrix of `h ↦ 2A(x, h)`.
    pub fn doubled_partial(&self, x: &Vector) -> Matrix {
        let n = self.dim_x;
        let mut jac = Matrix::zeros(self.dim_y, n);
        for k in 0..self.dim_y {
            for j in 0..n {
                jac[(k, j)] = 2.0 * (0..n).map(|i| self.at(k, i, j) * x[i]).sum::<f64>();
            }
        }
        jac
    }
}

fn flatten(tensor: &[Vec<Vec<f64>>]) -> Result<(usize, usize, Vec<f64>), ProblemError> {
    let dim_y = tensor.len();
    let dim_x = tensor.first().map_or(0, Vec::len);
    let mut coeffs = Vec::with_capacity(dim_y * dim_x * dim_x);
    for (k, slice) in tensor.iter().enumerate() {
        if slice.len() != dim_x {
            return Err(ProblemError::DimensionMismatch(format!(
                "slice {k} has {} rows, expected {dim_x}",
                slice.len()
            )));
        }
        for (i, row) in slice.iter().enumerate() {
            if row.len() != dim_x {
                return Err(ProblemError::DimensionMismatch(format!(
                    "T[{k}][{i}] has {} entries, expected {dim_x}",
                    row.len()
                )));
            }
            coeffs.extend_from_slice(row);
        }
    }
    Ok((dim_y, dim_x, coeffs))
}

/// Upper bound on `sup ‖A(x1, x2)‖_Y / (‖x1‖_X ‖x2‖_X)` from per-slice
/// spectral norms `σ_k`: `(Σ σ_k²)^{1/2}` into ℓ2, `max σ_k` into ℓ∞, times
/// `n` when X carries the ℓ∞ norm.
pub fn certified_bound(dim_y: usize, dim_x: usize, coeffs: &[f64], norms: (NormTag, NormTag)) -> f64 {
    let n = dim_x;
    let slice_norms: Vec<f64> = (0..dim_y)
        .map(|k| {
            let rows: Vec<Vec<f64>> = (0..n).map(|i| coeffs[(k * n + i) * n..(k * n + i + 1) * n].to_vec()).collect();
            let m = Matrix::from_rows(&rows).expect("square slice");
            singular_values(&m)[0]
        })
        .collect();
    let y_part = match norms.1 {
        NormTag::L2 => slice_norms.iter().map(|s| s * s).sum::<f64>().sqrt(),
        NormTag::LInf => slice_norms.iter().copied().fold(0.0, f64::max),
    };
    match norms.0 {
        NormTag::L2 => y_part,
        NormTag::LInf => y_part * n as f64,
    }
}

/// `Φ(x) = A(x, x) + C` with `Φ′(x)h = 2A(x, h)`.
#[derive(Debug, Clone)]
pub struct QuadraticMap {
    tensor: BilinearMap,
    offset: Vector,
}

impl QuadraticMap {
    pub fn new(tensor: BilinearMap, offset: Vector) -> Self {
        assert_eq!(tensor.dim_y(), offset.dim());
        QuadraticMap { tensor, offset }
    }
}

impl SmoothMap for QuadraticMap {
    fn dim_in(&self) -> usize {
        self.tensor.dim_x()
    }

    fn dim_out(&self) -> usize {
        self.tensor.dim_y()
    }

    fn evaluate(&self, x: &Vector) -> Vector {
        &self.tensor.apply_unchecked(x, x) + &self.offset
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        self.tensor.doubled_partial(x)
    }
}

/// `A(x, x) + Bx + C = 0` with its constants.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    tensor: BilinearMap,
    matrix: Matrix,
    offset: Vector,
    b: f64,
    c: f64,
}

impl QuadraticProblem {
    /// Derives `b = σ_min(B)` (Euclidean norms only) and `c = ‖C‖`.
    pub fn new(tensor: BilinearMap, matrix: Matrix, offset: Vector) -> Result<Self, ProblemError> {
        if tensor.norms() != (NormTag::L2, NormTag::L2) {
            return Err(CoveringError::ConstantRequired { x: tensor.norms().0, y: tensor.norms().1 }.into());
        }
        let b = smallest_singular_value(&matrix);
        let c = offset.norm(NormTag::L2);
        Self::with_constants(tensor, matrix, offset, b, c)
    }

    /// Explicit `b` and `c`; `c` must equal `‖C‖` and, for Euclidean norms,
    /// `b` may not exceed `σ_min(B)`.
    pub fn with_constants(
        tensor: BilinearMap,
        matrix: Matrix,
        offset: Vector,
        b: f64,
        c: f64,
    ) -> Result<Self, ProblemError> {
        let (m, n) = (tensor.dim_y(), tensor.dim_x());
        if matrix.rows() != m || matrix.cols() != n || offset.dim() != m {
            return Err(ProblemError::DimensionMismatch(format!(
                "A: R^{n}×R^{n} → R^{m}, B is {}×{}, C has {} entries",
                matrix.rows(),
                matrix.cols(),
                offset.dim()
            )));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(ProblemError::InvalidConstant(format!("b = {b}")));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(ProblemError::InvalidConstant(format!("c = {c}")));
        }
        let (_, ny) = tensor.norms();
        let actual = offset.norm(ny);
        if (actual - c).abs() > CONSTANT_TOL * (1.0 + c) {
            return Err(ProblemError::OffsetNorm { claimed: c, actual });
        }
        if tensor.norms() == (NormTag::L2, NormTag::L2) {
            let sigma_min = smallest_singular_value(&matrix);
            if b > sigma_min + COVERING_CONSTANT_TOL {
                return Err(ProblemError::CoveringConstant { claimed: b, sigma_min });
            }
        }
        Ok(QuadraticProblem { tensor, matrix, offset, b, c })
    }

    pub fn tensor(&self) -> &BilinearMap {
        &self.tensor
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }

    pub fn norms(&self) -> (NormTag, NormTag) {
        self.tensor.norms()
    }

    pub fn a(&self) -> f64 {
        self.tensor.bound()
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `b² − 4ac`, snapped to zero within `DISCRIMINANT_TOL·b²`.
    pub fn discriminant(&self) -> f64 {
        let d = self.b * self.b - 4.0 * self.a() * self.c;
        if d.abs() <= DISCRIMINANT_TOL * self.b * self.b {
            0.0
        } else {
            d
        }
    }

    /// `(b − √D)/(2a)`, the closed-form smallest crossing.
    pub fn tau_star(&self) -> f64 {
        (self.b - self.discriminant().max(0.0).sqrt()) / (2.0 * self.a())
    }

    /// `‖A(x, x) + Bx + C‖_Y`.
    pub fn residual(&self, x: &Vector) -> f64 {
        let value = &(&self.tensor.apply_unchecked(x, x) + &self.matrix.mul_vec(x)) + &self.offset;
        value.norm(self.norms().1)
    }

    pub fn phi_map(&self) -> QuadraticMap {
        QuadraticMap::new(self.tensor.clone(), self.offset.clone())
    }

    /// `Ψ(x) = −Bx` with constant `b`.
    pub fn covering(&self) -> Result<LinearSurjectiveCovering, CoveringError> {
        LinearSurjectiveCovering::with_constant(self.matrix.clone(), Sign::Negative, self.b, self.norms())
    }
}

/// Sets up `Φ(x) = A(x, x) + C`, `Ψ(x) = −Bx`, `ψ(τ) = bτ`,
/// `φ(τ) = aτ² + c` at `x0 = 0`, `τ0 = 0`, `r = ∞`.
pub fn build_quadratic_instance(q: &QuadraticProblem) -> Result<ProblemInstance, ProblemError> {
    let d = q.discriminant();
    if d < 0.0 {
        return Err(ProblemError::NegativeDiscriminant(d));
    }
    let cover = q.covering()?;
    let pair = MajorantPair::new(
        cover.modulus().clone(),
        ScalarFn::polynomial(vec![q.c(), 0.0, q.a()]),
        0.0,
        Radius::Unbounded,
    )?;
    Ok(ProblemInstance::new(Arc::new(q.phi_map()), Arc::new(cover), pair, Vector::zeros(q.tensor.dim_x()))?)
}

/// Fixed-point problem `f(x) = x` as a coincidence problem with `Ψ = id`,
/// `ψ(τ) = τ`, and `φ(τ) = L(τ) − L(0) + ‖f(x0) − x0‖` for the given
/// Lipschitz majorant `L` (which must carry its derivative).
pub fn build_kantorovich_instance(
    f: Arc<dyn SmoothMap>,
    lip_majorant: ScalarFn,
    x0: Vector,
    norm: NormTag,
) -> Result<ProblemInstance, ProblemError> {
    if f.dim_in() != f.dim_out() {
        return Err(ProblemError::DimensionMismatch(format!(
            "fixed-point map must be square, got R^{} → R^{}",
            f.dim_in(),
            f.dim_out()
        )));
    }
    if !lip_majorant.has_derivative() {
        return Err(MajorantError::MissingDerivative.into());
    }
    let gap = f.evaluate(&x0).distance(&x0, norm);
    let base = lip_majorant.eval(0.0);
    let label = format!("{} - {base} + {gap}", lip_majorant.label());
    let (value, slope) = (lip_majorant.clone(), lip_majorant);
    let phi = ScalarFn::with_derivative(
        label,
        move |t| value.eval(t) - base + gap,
        move |t| slope.derivative(t).expect("checked above"),
    );
    let pair = MajorantPair::new(ScalarFn::linear(1.0, 0.0), phi, 0.0, Radius::Unbounded)?;
    let cover = Arc::new(IdentityCovering::new(x0.dim(), norm));
    Ok(ProblemInstance::new(f, cover, pair, x0)?)
}

/// Deterministic random quadratic problem with Euclidean norms.
///
/// The tensor is symmetrized Gaussian noise rescaled so its certified bound
/// is a target `a ∈ [0.5, 2]`; `B = U diag(s) Vᵀ` with orthonormal factors
/// and `s ∈ [0.5, 2]`, so `b = σ_min(B)` is known; `C` points in a random
/// direction with `‖C‖ = c = (b² − D)/(4a)` and `D = margin·b²`. Margins
/// above 1 are clamped, which gives `c = 0`.
pub fn random_quadratic(dim_x: usize, dim_y: usize, margin: f64, seed: u64) -> Result<QuadraticProblem, ProblemError> {
    if dim_x == 0 || dim_y == 0 || dim_y > dim_x {
        return Err(ProblemError::DimensionMismatch(format!("need 1 ≤ dim_y ≤ dim_x, got {dim_y}, {dim_x}")));
    }
    if margin.is_nan() || margin < 0.0 {
        return Err(ProblemError::InvalidConstant(format!("margin = {margin}")));
    }
    let norms = (NormTag::L2, NormTag::L2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dim_x;

    let mut raw = vec![0.0; dim_y * n * n];
    for k in 0..dim_y {
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.sample(StandardNormal);
                raw[(k * n + i) * n + j] = v;
                raw[(k * n + j) * n + i] = v;
            }
        }
    }
    let target_a = rng.random_range(0.5..=2.0);
    let scale = target_a / certified_bound(dim_y, n, &raw, norms);
    let coeffs: Vec<f64> = raw.iter().map(|v| v * scale).collect();
    let a = certified_bound(dim_y, n, &coeffs, norms);
    let tensor = BilinearMap::new(dim_y, n, coeffs, a, norms)?;

    let gaussian = |rng: &mut ChaCha8Rng, rows: usize, cols: usize| {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = rng.sample(StandardNormal);
            }
        }
        m
    };
    let left = orthonormalize_columns(&gaussian(&mut rng, dim_y, dim_y))?;
    let right = orthonormalize_columns(&gaussian(&mut rng, n, dim_y))?;
    let spectrum: Vec<f64> = (0..dim_y).map(|_| rng.random_range(0.5..=2.0)).collect();
    let matrix = left.matmul(&Matrix::from_diagonal(&spectrum)).matmul(&right.transpose());
    let b = smallest_singular_value(&matrix);

    let fraction = margin.min(1.0);
    let c = b * b * (1.0 - fraction) / (4.0 * a);
    let offset = if c > 0.0 { unit_direction(&mut rng, dim_y, NormTag::L2).scaled(c) } else { Vector::zeros(dim_y) };
    let c = offset.norm(NormTag::L2);
    QuadraticProblem::with_constants(tensor, matrix, offset, b, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::finite_diff_jacobian;
    use crate::maps::{AffineMap, FnMap};
    use crate::solver::{certify_trace, coincidence_solve};

    fn scalar(a: f64, b: f64, c: f64) -> QuadraticProblem {
        let tensor = BilinearMap::new(1, 1, vec![a], a, (NormTag::L2, NormTag::L2)).unwrap();
        QuadraticProblem::new(tensor, Matrix::from_diagonal(&[b]), Vector::from(vec![c])).unwrap()
    }

    fn gallery_tensor() -> BilinearMap {
        BilinearMap::from_nested_certified(
            &[vec![vec![0.5, 0.25], vec![0.25, 0.0]], vec![vec![0.0, 0.25], vec![0.25, 0.5]]],
            (NormTag::L2, NormTag::L2),
        )
        .unwrap()
    }

    #[test]
    fn apply_scalar_and_zero() {
        let t = BilinearMap::new(1, 1, vec![1.0], 1.0, (NormTag::L2, NormTag::L2)).unwrap();
        let out = t.apply(&Vector::from(vec![2.0]), &Vector::from(vec![3.0])).unwrap();
        assert_eq!(out[0], 6.0);
        let g = gallery_tensor();
        let zero = g.apply(&Vector::zeros(2), &Vector::from(vec![1.0, -4.0])).unwrap();
        assert_eq!(zero.as_slice(), &[0.0, 0.0]);
        assert!(g.apply(&Vector::zeros(3), &Vector::zeros(2)).is_err());
    }

    #[test]
    fn apply_matches_polynomial_expansion() {
        // A(x,x) for the gallery tensor written out by hand
        let g = gallery_tensor();
        let mut rng = trial_rng(3, 0);
        for _ in 0..100 {
            let x = Vector::from(vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
            let (u, v) = (x[0], x[1]);
            let expected = [0.5 * u * u + 0.5 * u * v, 0.5 * u * v + 0.5 * v * v];
            let got = g.apply(&x, &x).unwrap();
            assert!((got[0] - expected[0]).abs() < 1e-12 && (got[1] - expected[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_asymmetric_and_understated_bound() {
        let asym = BilinearMap::new(1, 2, vec![1.0, 0.5, 0.25, 1.0], 10.0, (NormTag::L2, NormTag::L2));
        assert!(matches!(asym, Err(ProblemError::NotSymmetric { .. })));
        let small = BilinearMap::new(1, 1, vec![2.0], 1.0, (NormTag::L2, NormTag::L2));
        assert!(matches!(small, Err(ProblemError::BoundViolated { .. })));
    }

    #[test]
    fn quadratic_jacobian_matches_differences() {
        let q = QuadraticProblem::new(
            gallery_tensor(),
            Matrix::from_rows(&[vec![2.0, 0.5], vec![0.0, 1.5]]).unwrap(),
            Vector::from(vec![0.1, -0.2]),
        )
        .unwrap();
        let phi = q.phi_map();
        let mut rng = trial_rng(5, 0);
        for _ in 0..50 {
            let x = Vector::from(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let fd = finite_diff_jacobian(|z| phi.evaluate(z), &x, 1e-5);
            assert!(phi.jacobian(&x).max_abs_diff(&fd) < 1e-6);
        }
    }

    #[test]
    fn scalar_instances() {
        let pos = scalar(1.0, 2.0, 0.75);
        assert_eq!(pos.discriminant(), 1.0);
        assert_eq!(pos.tau_star(), 0.5);
        let sol = coincidence_solve(&build_quadratic_instance(&pos).unwrap(), 1e-10, 100).unwrap();
        assert!((sol.x_star[0] + 0.5).abs() < 1e-10);

        let zero = scalar(1.0, 2.0, 1.0);
        assert_eq!(zero.discriminant(), 0.0);
        assert_eq!(zero.tau_star(), 1.0);
        let sol = coincidence_solve(&build_quadratic_instance(&zero).unwrap(), 1e-10, 5000).unwrap();
        assert!((sol.x_star[0] + 1.0).abs() < 1e-3);

        let neg = scalar(1.0, 2.0, 1.25);
        assert!(matches!(build_quadratic_instance(&neg), Err(ProblemError::NegativeDiscriminant(d)) if d == -1.0));
    }

    #[test]
    fn covering_constant_cannot_exceed_sigma_min() {
        let tensor = BilinearMap::new(1, 1, vec![1.0], 1.0, (NormTag::L2, NormTag::L2)).unwrap();
        let err =
            QuadraticProblem::with_constants(tensor, Matrix::from_diagonal(&[2.0]), Vector::from(vec![1.0]), 2.5, 1.0);
        assert!(matches!(err, Err(ProblemError::CoveringConstant { .. })));
    }

    #[test]
    fn kantorovich_examples() {
        let affine = Arc::new(AffineMap::new(Matrix::from_diagonal(&[0.5]), Vector::from(vec![0.5])));
        let p = build_kantorovich_instance(affine, ScalarFn::linear(0.5, 0.5), Vector::zeros(1), NormTag::L2).unwrap();
        let sol = coincidence_solve(&p, 1e-12, 200).unwrap();
        assert!((sol.tau_star - 1.0).abs() < 1e-15);
        assert!((sol.x_star[0] - 1.0).abs() < 1e-11);

        let k = Vector::from(vec![0.3, -0.4]);
        let constant = Arc::new(AffineMap::constant(2, k.clone()));
        let p =
            build_kantorovich_instance(constant, ScalarFn::linear(1e-9, 0.0), Vector::zeros(2), NormTag::L2).unwrap();
        let sol = coincidence_solve(&p, 1e-12, 10).unwrap();
        assert_eq!(sol.trace.steps(), 1);
        assert_eq!(sol.x_star, k);
        assert!((sol.tau_star - 0.5).abs() < 1e-9);

        // 0.9·sin has the unique fixed point 0; bisection on 0.9 sin x − x confirms it
        let (mut lo, mut hi) = (-0.3_f64, 0.2_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 0.9 * mid.sin() - mid > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!(lo.abs() < 1e-15);
        let sine = Arc::new(FnMap::new(
            "0.9 sin",
            1,
            1,
            |x| Vector::from(vec![0.9 * x[0].sin()]),
            |x| Matrix::from_diagonal(&[0.9 * x[0].cos()]),
        ));
        let p =
            build_kantorovich_instance(sine, ScalarFn::linear(0.9, 0.0), Vector::from(vec![0.5]), NormTag::L2).unwrap();
        let sol = coincidence_solve(&p, 1e-12, 1000).unwrap();
        assert!(sol.converged());
        assert!((sol.x_star[0] - lo).abs() < 1e-10);
        assert!((sol.x_star[0] - 0.5).abs() <= sol.tau_star + 1e-8);
    }

    #[test]
    fn random_instances_hit_requested_discriminant() {
        let q = random_quadratic(1, 1, 0.25, 7).unwrap();
        let d = q.b() * q.b() - 4.0 * q.a() * q.c();
        assert!((d - 0.25 * q.b() * q.b()).abs() < 1e-12 * q.b() * q.b());

        let q = random_quadratic(3, 2, 0.0, 1).unwrap();
        assert_eq!(q.discriminant(), 0.0);
        let a = random_quadratic(3, 2, 0.0, 1).unwrap();
        assert_eq!(a.matrix(), q.matrix());
        assert_eq!(a.offset(), q.offset());

        let q = random_quadratic(2, 2, 1e9, 0).unwrap();
        assert_eq!(q.c(), 0.0);
        let sol = coincidence_solve(&build_quadratic_instance(&q).unwrap(), 1e-10, 5).unwrap();
        assert!(sol.converged());
    }

    #[test]
    fn random_degenerate_instance_certificate() {
        let q = random_quadratic(3, 2, 0.0, 1).unwrap();
        let p = build_quadratic_instance(&q).unwrap();
        let sol = coincidence_solve(&p, 1e-10, 100_000).unwrap();
        assert!(certify_trace(&sol.trace, p.majorants()).holds());
        assert!(q.residual(&sol.x_star) <= 1e-8);
        assert!(sol.x_star.norm(NormTag::L2) <= q.tau_star() + 1e-8);
        // D = 0 for the constants (a, b, c) only; the certified a exceeds ‖A‖
        // on this draw and the vector equation is not tangent, so it contracts
        assert!(sol.converged());
        assert!(sol.trace.steps() < 20);
    }
}
