//! Problem configs and the built-in gallery.
//!
//! Configs are JSON documents:
//!
//! ```json
//! {
//!   "name": "scalar-d-pos",
//!   "problem": {
//!     "kind": "quadratic",
//!     "tensor": [[[1.0]]],
//!     "matrix": [[2.0]],
//!     "offset": [0.75],
//!     "a": 1.0, "b": 2.0, "c": 0.75
//!   },
//!   "norms": { "x": "l2", "y": "l2" },
//!   "solver": { "tolerance": 1e-10, "max_steps": 100000, "method": "majorant" }
//! }
//! ```
//!
//! Every section except `problem` may be omitted.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covering::{CoveringError, LinearSurjectiveCovering, Sign};
use crate::linalg::{operator_norm, Matrix, NormTag, Vector};
use crate::majorant::{MajorantPair, Radius, ScalarFn};
use crate::maps::{AffineMap, ScalarPolynomial, SmoothMap};
use crate::problems::{
    build_kantorovich_instance, build_quadratic_instance, certified_bound, random_quadratic, BilinearMap, ProblemError,
    QuadraticProblem,
};
use crate::solver::{ProblemInstance, DEFAULT_H2_SAMPLES, DEFAULT_MAX_STEPS, DEFAULT_RESIDUAL_TOL};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

impl From<CoveringError> for ConfigError {
    fn from(e: CoveringError) -> Self {
        ConfigError::Problem(e.into())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Majorant,
    Baseline,
    Compare,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    #[serde(default)]
    pub x: NormTag,
    #[serde(default)]
    pub y: NormTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_steps: usize,
    pub method: Method,
    pub strict_h2: bool,
    /// Samples for each of the sampled hypothesis audits.
    pub audit_samples: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: DEFAULT_RESIDUAL_TOL,
            max_steps: DEFAULT_MAX_STEPS,
            method: Method::Majorant,
            strict_h2: false,
            audit_samples: DEFAULT_H2_SAMPLES,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `A(x, x) + Bx + C = 0`; omitted constants are derived.
    Quadratic {
        tensor: Vec<Vec<Vec<f64>>>,
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
    },
    /// A seeded random quadratic with `D = margin·b²`.
    RandomQuadratic { dim_x: usize, dim_y: usize, margin: f64, seed: u64 },
    /// Fixed point of `x ↦ Mx + k`; `lipschitz` holds the ascending
    /// coefficients of the Lipschitz majorant, defaulting to `‖M‖·τ`.
    Kantorovich {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<Vec<f64>>,
    },
    /// Scalar `Φ(x) = Σ phi[k] x^k` against `Ψ(x) = −b·x`, with majorants
    /// `ψ(τ) = bτ` and `φ(τ) = Σ majorant[k] τ^k` around `x0`.
    CustomScalar {
        phi: Vec<f64>,
        b: f64,
        majorant: Vec<f64>,
        #[serde(default)]
        x0: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub norms: NormConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// A config turned into something solvable.
pub struct BuiltProblem {
    pub instance: ProblemInstance,
    /// Present for the quadratic kinds, which also support `compare`.
    pub quadratic: Option<QuadraticProblem>,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ProblemConfig = serde_json::from_str(text)?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    fn check(&self) -> Result<(), ConfigError> {
        let s = &self.solver;
        if !(s.tolerance > 0.0 && s.tolerance.is_finite()) {
            return Err(ConfigError::Invalid(format!("tolerance must be positive, got {}", s.tolerance)));
        }
        if s.audit_samples == 0 {
            return Err(ConfigError::Invalid("audit_samples must be positive".into()));
        }
        Ok(())
    }

    pub fn norms(&self) -> (NormTag, NormTag) {
        (self.norms.x, self.norms.y)
    }

    pub fn build(&self) -> Result<BuiltProblem, ConfigError> {
        let norms = self.norms();
        match &self.problem {
            ProblemSpec::Quadratic { tensor, matrix, offset, a, b, c } => {
                let (dim_y, dim_x) = (tensor.len(), tensor.first().map_or(0, Vec::len));
                let flat: Vec<f64> = tensor.iter().flatten().flatten().copied().collect();
                if flat.len() != dim_y * dim_x * dim_x {
                    return Err(ConfigError::Invalid("tensor must be dim_y × dim_x × dim_x".into()));
                }
                let a = a.unwrap_or_else(|| certified_bound(dim_y, dim_x, &flat, norms));
                let tensor = BilinearMap::from_nested(tensor, a, norms)?;
                let matrix = Matrix::from_rows(matrix).map_err(ProblemError::from)?;
                let offset = Vector::from(offset.clone());
                let c = c.unwrap_or_else(|| offset.norm(norms.1));
                let b = match b {
                    Some(b) => *b,
                    None if norms == (NormTag::L2, NormTag::L2) => crate::linalg::smallest_singular_value(&matrix),
                    None => return Err(CoveringError::ConstantRequired { x: norms.0, y: norms.1 }.into()),
                };
                let q = QuadraticProblem::with_constants(tensor, matrix, offset, b, c)?;
                Ok(BuiltProblem { instance: build_quadratic_instance(&q)?, quadratic: Some(q) })
            }
            ProblemSpec::RandomQuadratic { dim_x, dim_y, margin, seed } => {
                if norms != (NormTag::L2, NormTag::L2) {
                    return Err(ConfigError::Invalid("random-quadratic uses Euclidean norms".into()));
                }
                let q = random_quadratic(*dim_x, *dim_y, *margin, *seed)?;
                Ok(BuiltProblem { instance: build_quadratic_instance(&q)?, quadratic: Some(q) })
            }
            ProblemSpec::Kantorovich { matrix, offset, x0, lipschitz } => {
                if norms.0 != norms.1 {
                    return Err(ConfigError::Invalid("kantorovich needs the same norm on X and Y".into()));
                }
                let matrix = Matrix::from_rows(matrix).map_err(ProblemError::from)?;
                if matrix.rows() != matrix.cols() || offset.len() != matrix.rows() {
                    return Err(ConfigError::Invalid("kantorovich needs a square matrix and matching offset".into()));
                }
                let dim = matrix.rows();
                let x0 = Vector::from(x0.clone().unwrap_or_else(|| vec![0.0; dim]));
                if x0.dim() != dim {
                    return Err(ConfigError::Invalid(format!("x0 has {} entries, expected {dim}", x0.dim())));
                }
                let lip = match lipschitz {
                    Some(coeffs) => ScalarFn::polynomial(coeffs.clone()),
                    None => ScalarFn::linear(operator_norm(&matrix, norms.0, norms.0), 0.0),
                };
                let f: Arc<dyn SmoothMap> = Arc::new(AffineMap::new(matrix, Vector::from(offset.clone())));
                Ok(BuiltProblem { instance: build_kantorovich_instance(f, lip, x0, norms.0)?, quadratic: None })
            }
            ProblemSpec::CustomScalar { phi, b, majorant, x0 } => {
                let cover =
                    LinearSurjectiveCovering::with_constant(Matrix::from_diagonal(&[*b]), Sign::Negative, *b, norms)?;
                let pair = MajorantPair::new(
                    ScalarFn::linear(*b, 0.0),
                    ScalarFn::polynomial(majorant.clone()),
                    0.0,
                    Radius::Unbounded,
                )
                .map_err(ProblemError::from)?;
                let instance = ProblemInstance::new(
                    Arc::new(ScalarPolynomial::new(phi.clone())),
                    Arc::new(cover),
                    pair,
                    Vector::from(vec![*x0]),
                )
                .map_err(ProblemError::from)?;
                Ok(BuiltProblem { instance, quadratic: None })
            }
        }
    }
}

pub const GALLERY: [&str; 5] = ["scalar-d-pos", "scalar-d-zero", "kantorovich-affine", "matrix-2d", "random-quadratic"];

fn scalar_quadratic(name: &str, a: f64, b: f64, c: f64) -> ProblemConfig {
    ProblemConfig {
        name: Some(name.into()),
        problem: ProblemSpec::Quadratic {
            tensor: vec![vec![vec![a]]],
            matrix: vec![vec![b]],
            offset: vec![c],
            a: Some(a),
            b: Some(b),
            c: Some(c),
        },
        norms: NormConfig::default(),
        solver: SolverConfig::default(),
    }
}

/// The built-in config called `name`.
pub fn gallery(name: &str) -> Option<ProblemConfig> {
    let config = match name {
        "scalar-d-pos" => scalar_quadratic(name, 1.0, 2.0, 0.75),
        "scalar-d-zero" => scalar_quadratic(name, 1.0, 2.0, 1.0),
        "kantorovich-affine" => ProblemConfig {
            name: Some(name.into()),
            problem: ProblemSpec::Kantorovich {
                matrix: vec![vec![0.5]],
                offset: vec![0.5],
                x0: Some(vec![0.0]),
                lipschitz: Some(vec![0.5, 0.5]),
            },
            norms: NormConfig::default(),
            solver: SolverConfig { tolerance: 1e-12, ..SolverConfig::default() },
        },
        "matrix-2d" => ProblemConfig {
            name: Some(name.into()),
            problem: ProblemSpec::Quadratic {
                tensor: vec![vec![vec![0.5, 0.25], vec![0.25, 0.0]], vec![vec![0.0, 0.25], vec![0.25, 0.5]]],
                matrix: vec![vec![2.0, 0.5], vec![0.0, 1.5]],
                offset: vec![0.1, -0.2],
                a: None,
                b: None,
                c: None,
            },
            norms: NormConfig::default(),
            solver: SolverConfig::default(),
        },
        "random-quadratic" => ProblemConfig {
            name: Some(name.into()),
            problem: ProblemSpec::RandomQuadratic { dim_x: 3, dim_y: 2, margin: 0.1, seed: 42 },
            norms: NormConfig::default(),
            solver: SolverConfig::default(),
        },
        _ => return None,
    };
    Some(config)
}
