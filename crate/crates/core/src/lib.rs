//! Coincidence points `Φ(x) = Ψ(x)` of a covering map Ψ and a smooth map Φ
//! in finite-dimensional normed spaces, solved by successive approximation
//! under a pair of scalar majorants.
//!
//! The pieces, bottom up:
//!
//! * [`linalg`]: vectors, matrices, norms, Jacobi SVD, minimal-norm solves.
//! * [`majorant`]: the scalar pair (ψ, φ), the crossing τ* and the τ-sequence.
//! * [`covering`]: covering maps with constructive local inversion and audits.
//! * [`solver`]: the iteration itself, its certificates and rate estimates.
//! * [`problems`]: quadratic operator equations and the fixed-point reduction.
//! * [`baseline`]: the α-covering iteration for comparison.
//! * [`config`] and [`cli`]: configs, reports and the command-line front end.

pub mod baseline;
pub mod cli;
pub mod config;
pub mod covering;
pub mod exec;
pub mod linalg;
pub mod majorant;
pub mod maps;
pub mod problems;
pub mod report;
pub mod sampling;
pub mod solver;

pub use covering::{CoveringMap, IdentityCovering, LinearSurjectiveCovering, Sign};
pub use exec::{AuditOptions, Execution};
pub use linalg::{Matrix, NormTag, Vector};
pub use majorant::{MajorantPair, Radius, ScalarFn};
pub use maps::SmoothMap;
pub use problems::{build_kantorovich_instance, build_quadratic_instance, QuadraticProblem};
pub use solver::{coincidence_solve, IterateTrace, ProblemInstance, Solution};
