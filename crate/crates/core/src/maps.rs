//! Continuously differentiable maps Φ: X → Y with analytic Jacobians.

use std::fmt;
use std::sync::Arc;

use crate::linalg::{Matrix, Vector};
use crate::majorant::horner;

/// A C¹ map with its Fréchet derivative.
pub trait SmoothMap: Send + Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn evaluate(&self, x: &Vector) -> Vector;
    /// `Φ′(x)` as a `dim_out × dim_in` matrix.
    fn jacobian(&self, x: &Vector) -> Matrix;
}

/// `x ↦ Mx + k`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    matrix: Matrix,
    offset: Vector,
}

impl AffineMap {
    pub fn new(matrix: Matrix, offset: Vector) -> Self {
        assert_eq!(matrix.rows(), offset.dim(), "offset length must match matrix rows");
        AffineMap { matrix, offset }
    }

    /// The constant map `x ↦ k` on `R^dim_in`.
    pub fn constant(dim_in: usize, value: Vector) -> Self {
        let rows = value.dim();
        AffineMap::new(Matrix::zeros(rows, dim_in), value)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }
}

impl SmoothMap for AffineMap {
    fn dim_in(&self) -> usize {
        self.matrix.cols()
    }

    fn dim_out(&self) -> usize {
        self.matrix.rows()
    }

    fn evaluate(&self, x: &Vector) -> Vector {
        &self.matrix.mul_vec(x) + &self.offset
    }

    fn jacobian(&self, _x: &Vector) -> Matrix {
        self.matrix.clone()
    }
}

/// Scalar polynomial `x ↦ Σ c_k x^k` on R, coefficients ascending.
#[derive(Debug, Clone)]
pub struct ScalarPolynomial {
    coeffs: Vec<f64>,
    dcoeffs: Vec<f64>,
}

impl ScalarPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let dcoeffs = coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        ScalarPolynomial { coeffs, dcoeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

impl SmoothMap for ScalarPolynomial {
    fn dim_in(&self) -> usize {
        1
    }

    fn dim_out(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &Vector) -> Vector {
        Vector::from(vec![horner(&self.coeffs, x[0])])
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        Matrix::from_diagonal(&[horner(&self.dcoeffs, x[0])])
    }
}

type VecFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type JacFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// A map given by a pair of closures.
#[derive(Clone)]
pub struct FnMap {
    dim_in: usize,
    dim_out: usize,
    value: VecFn,
    jacobian: JacFn,
    label: String,
}

impl FnMap {
    pub fn new(
        label: impl Into<String>,
        dim_in: usize,
        dim_out: usize,
        value: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        jacobian: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        FnMap { dim_in, dim_out, value: Arc::new(value), jacobian: Arc::new(jacobian), label: label.into() }
    }
}

impl fmt::Debug for FnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnMap")
            .field("label", &self.label)
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .finish()
    }
}

impl SmoothMap for FnMap {
    fn dim_in(&self) -> usize {
        self.dim_in
    }

    fn dim_out(&self) -> usize {
        self.dim_out
    }

    fn evaluate(&self, x: &Vector) -> Vector {
        (self.value)(x)
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        (self.jacobian)(x)
    }
}
