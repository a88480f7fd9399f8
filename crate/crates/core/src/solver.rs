//! The majorant-controlled coincidence iteration.
//!
//! Starting from `x0`, each step solves `Ψ(x_{j+1}) = Φ(x_j)` through the
//! covering's local inverse with radius budget `τ_{j+1} − τ_j`, where the
//! budgets come from the scalar τ-sequence of the majorant pair. Every step
//! is checked against the bounds the construction guarantees:
//!
//! * `‖x_j − x0‖ ≤ τ_j − τ0`
//! * `‖x_{j+1} − x_j‖ ≤ τ_{j+1} − τ_j`
//! * `Ψ(x_{j+1}) = Φ(x_j)`
//! * `‖Φ(x_j) − Ψ(x_j)‖ ≤ ψ(τ_{j+1}) − ψ(τ_j)`
//!
//! so a returned trace doubles as a certificate, including a partial one
//! when the step limit is hit first.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::covering::{CoveringError, CoveringMap};
use crate::exec::{map_indexed, map_slice, trial_rng, AuditOptions, Execution};
use crate::linalg::{operator_norm, NormTag, Vector};
use crate::majorant::{next_tau, smallest_crossing, validate_h2_start, MajorantError, MajorantPair};
use crate::maps::SmoothMap;
use crate::sampling::point_in_ball;

/// Slack on the distance bounds `‖x_j − x0‖` and `‖x_{j+1} − x_j‖`.
pub const DISTANCE_TOL: f64 = 1e-8;
/// Relative slack on `‖Ψ(x_{j+1}) − Φ(x_j)‖`.
pub const INVERSION_TOL: f64 = 1e-9;
/// Slack on `‖Φ(x_j) − Ψ(x_j)‖ ≤ ψ(τ_{j+1}) − ψ(τ_j)`.
pub const MAJORIZATION_TOL: f64 = 1e-8;
/// Relative slack in the sampled check `‖Φ′(x)‖ ≤ φ′(τ)`.
pub const H2_REL_TOL: f64 = 1e-6;
/// The iteration also stops once `τ* − τ_j` falls below this.
pub const TAIL_TOL: f64 = 1e-14;

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_STEPS: usize = 100_000;
pub const DEFAULT_H2_SAMPLES: usize = 256;

/// Which hypothesis a failure points at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Ψ is a ψ-covering.
    H1,
    /// Start gap and derivative majorization by φ.
    H2,
    /// `ψ = φ` has a solution on the interval.
    Crossing,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
            Hypothesis::Crossing => "crossing",
        })
    }
}

#[derive(Debug, Error, Clone)]
pub enum SolveError {
    #[error(transparent)]
    Majorant(#[from] MajorantError),
    #[error("‖Φ(x0) − Ψ(x0)‖ = {gap} exceeds φ(τ0) − ψ(τ0) = {allowed}")]
    H2Start { gap: f64, allowed: f64 },
    #[error("‖Φ′(x)‖ ≤ φ′(τ) fails at {} of {} samples (worst ratio {})", .0.violations, .0.samples, .0.max_ratio)]
    H2Derivative(H2Report),
    #[error("step {step}: residual {residual} exceeds the majorant increment {allowed}")]
    ResidualMajorization { step: usize, residual: f64, allowed: f64, trace: Box<IterateTrace> },
    #[error("step {step}: covering needed radius {needed} with budget {budget}")]
    BudgetExceeded { step: usize, needed: f64, budget: f64, trace: Box<IterateTrace> },
    #[error("step {step}: ‖Ψ(x_(j+1)) − Φ(x_j)‖ is {defect} relative to ‖Φ(x_j)‖")]
    InversionDefect { step: usize, defect: f64, trace: Box<IterateTrace> },
    #[error("step {step}: iterate left the certified ball ({detail})")]
    DistanceBound { step: usize, detail: String, trace: Box<IterateTrace> },
    #[error(transparent)]
    Covering(#[from] CoveringError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl SolveError {
    pub fn hypothesis(&self) -> Hypothesis {
        match self {
            SolveError::Majorant(_) => Hypothesis::Crossing,
            SolveError::H2Start { .. } | SolveError::H2Derivative(_) | SolveError::ResidualMajorization { .. } => {
                Hypothesis::H2
            }
            SolveError::BudgetExceeded { .. }
            | SolveError::InversionDefect { .. }
            | SolveError::DistanceBound { .. }
            | SolveError::Covering(_)
            | SolveError::Dimension(_) => Hypothesis::H1,
        }
    }

    /// The iterations completed before a mid-run failure.
    pub fn partial_trace(&self) -> Option<&IterateTrace> {
        match self {
            SolveError::ResidualMajorization { trace, .. }
            | SolveError::BudgetExceeded { trace, .. }
            | SolveError::InversionDefect { trace, .. }
            | SolveError::DistanceBound { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

/// Φ, the covering Ψ, the majorants and the starting point.
#[derive(Clone)]
pub struct ProblemInstance {
    phi: Arc<dyn SmoothMap>,
    cover: Arc<dyn CoveringMap>,
    majorants: MajorantPair,
    x0: Vector,
}

impl fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("dim_x", &self.cover.dim_x())
            .field("dim_y", &self.cover.dim_y())
            .field("norms", &self.cover.norms())
            .field("majorants", &self.majorants)
            .field("x0", &self.x0)
            .finish()
    }
}

impl ProblemInstance {
    /// Checks dimensions and the start condition
    /// `‖Φ(x0) − Ψ(x0)‖ ≤ φ(τ0) − ψ(τ0)`.
    pub fn new(
        phi: Arc<dyn SmoothMap>,
        cover: Arc<dyn CoveringMap>,
        majorants: MajorantPair,
        x0: Vector,
    ) -> Result<Self, SolveError> {
        if phi.dim_in() != cover.dim_x() || phi.dim_out() != cover.dim_y() {
            return Err(SolveError::Dimension(format!(
                "Φ maps R^{} → R^{} but Ψ maps R^{} → R^{}",
                phi.dim_in(),
                phi.dim_out(),
                cover.dim_x(),
                cover.dim_y()
            )));
        }
        if x0.dim() != cover.dim_x() {
            return Err(SolveError::Dimension(format!(
                "x0 has {} entries, X has dimension {}",
                x0.dim(),
                cover.dim_x()
            )));
        }
        let instance = ProblemInstance { phi, cover, majorants, x0 };
        let gap = instance.residual_at(&instance.x0);
        if !validate_h2_start(&instance.majorants, gap) {
            let m = &instance.majorants;
            return Err(SolveError::H2Start { gap, allowed: m.phi(m.tau0()) - m.psi(m.tau0()) });
        }
        Ok(instance)
    }

    pub fn phi(&self) -> &dyn SmoothMap {
        self.phi.as_ref()
    }

    pub fn phi_arc(&self) -> Arc<dyn SmoothMap> {
        Arc::clone(&self.phi)
    }

    pub fn cover(&self) -> &dyn CoveringMap {
        self.cover.as_ref()
    }

    pub fn cover_arc(&self) -> Arc<dyn CoveringMap> {
        Arc::clone(&self.cover)
    }

    pub fn majorants(&self) -> &MajorantPair {
        &self.majorants
    }

    pub fn x0(&self) -> &Vector {
        &self.x0
    }

    pub fn norms(&self) -> (NormTag, NormTag) {
        self.cover.norms()
    }

    /// `‖Φ(x) − Ψ(x)‖_Y`.
    pub fn residual_at(&self, x: &Vector) -> f64 {
        self.phi.evaluate(x).distance(&self.cover.evaluate(x), self.cover.norms().1)
    }
}

/// How the sampled derivative check is treated by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum H2Check {
    Skip,
    /// Log a warning and keep going.
    Warn,
    /// Refuse to iterate.
    Strict,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub residual_tol: f64,
    pub max_steps: usize,
    pub h2_check: H2Check,
    pub h2_audit: AuditOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            residual_tol: DEFAULT_RESIDUAL_TOL,
            max_steps: DEFAULT_MAX_STEPS,
            h2_check: H2Check::Warn,
            h2_audit: AuditOptions::new(DEFAULT_H2_SAMPLES),
        }
    }
}

/// One iterate of the coincidence scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub j: usize,
    pub tau: f64,
    pub x: Vector,
    /// `‖x_j − x_{j−1}‖_X` (zero for `j = 0`).
    pub step_norm: f64,
    /// `‖x_j − x0‖_X`.
    pub deviation: f64,
    /// `‖Φ(x_j) − Ψ(x_j)‖_Y`.
    pub residual: f64,
    /// `‖Ψ(x_j) − Φ(x_{j−1})‖_Y / (1 + ‖Φ(x_{j−1})‖_Y)` (zero for `j = 0`).
    pub inversion_defect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceStatus {
    Converged,
    MaxSteps,
    HypothesisViolation(String),
}

impl fmt::Display for TraceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceStatus::Converged => f.write_str("Converged"),
            TraceStatus::MaxSteps => f.write_str("MaxSteps"),
            TraceStatus::HypothesisViolation(detail) => write!(f, "HypothesisViolation({detail})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateTrace {
    pub tau0: f64,
    pub records: Vec<TraceRecord>,
    pub status: TraceStatus,
}

impl IterateTrace {
    /// Number of steps taken (records minus the starting point).
    pub fn steps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("a trace always holds the starting point")
    }

    pub fn step_norms(&self) -> Vec<f64> {
        self.records.iter().skip(1).map(|r| r.step_norm).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x_star: Vector,
    pub tau_star: f64,
    pub trace: IterateTrace,
    pub h2_report: Option<H2Report>,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.trace.status == TraceStatus::Converged
    }

    pub fn residual(&self) -> f64 {
        self.trace.last().residual
    }
}

/// Runs the iteration with default options apart from the two given.
pub fn coincidence_solve(p: &ProblemInstance, residual_tol: f64, max_steps: usize) -> Result<Solution, SolveError> {
    coincidence_solve_with(p, &SolveOptions { residual_tol, max_steps, ..SolveOptions::default() })
}

pub fn coincidence_solve_with(p: &ProblemInstance, opts: &SolveOptions) -> Result<Solution, SolveError> {
    let maj = &p.majorants;
    let (nx, ny) = p.norms();
    let tau_star = smallest_crossing(maj)?;

    let h2_report = match opts.h2_check {
        H2Check::Skip => None,
        check => {
            let report = h2_report_with_star(p, tau_star, &opts.h2_audit);
            if !report.passed() {
                if check == H2Check::Strict {
                    return Err(SolveError::H2Derivative(report));
                }
                log::warn!(
                    "derivative majorant violated at {}/{} samples (worst ratio {:.3e})",
                    report.violations,
                    report.samples,
                    report.max_ratio
                );
            }
            Some(report)
        }
    };

    let tau0 = maj.tau0();
    let mut x = p.x0.clone();
    let mut tau = tau0;
    let mut phi_x = p.phi.evaluate(&x);
    let mut residual = phi_x.distance(&p.cover.evaluate(&x), ny);
    let mut trace = IterateTrace {
        tau0,
        records: vec![TraceRecord {
            j: 0,
            tau,
            x: x.clone(),
            step_norm: 0.0,
            deviation: 0.0,
            residual,
            inversion_defect: 0.0,
        }],
        status: TraceStatus::MaxSteps,
    };

    let fail = |mut trace: IterateTrace, detail: String| {
        trace.status = TraceStatus::HypothesisViolation(detail);
        Box::new(trace)
    };

    let mut j = 0;
    loop {
        if residual <= opts.residual_tol || tau_star - tau <= TAIL_TOL {
            trace.status = TraceStatus::Converged;
            break;
        }
        if j == opts.max_steps {
            trace.status = TraceStatus::MaxSteps;
            break;
        }
        let tau_next = next_tau(maj, tau, tau_star)?;
        let allowed = maj.psi(tau_next) - maj.psi(tau);
        if residual > allowed + MAJORIZATION_TOL {
            let detail = format!("H2: residual {residual:e} > ψ increment {allowed:e} at step {j}");
            return Err(SolveError::ResidualMajorization { step: j, residual, allowed, trace: fail(trace, detail) });
        }
        let budget = tau_next - tau;
        let x_next = match p.cover.solve_within(&x, &phi_x, budget) {
            Ok(x_next) => x_next,
            Err(CoveringError::BudgetExceeded { needed, budget, .. }) => {
                let detail = format!("H1: needed radius {needed:e} > budget {budget:e} at step {j}");
                return Err(SolveError::BudgetExceeded { step: j, needed, budget, trace: fail(trace, detail) });
            }
            Err(e) => return Err(e.into()),
        };

        let step_norm = x_next.distance(&x, nx);
        let deviation = x_next.distance(&p.x0, nx);
        let psi_next = p.cover.evaluate(&x_next);
        let inversion_defect = psi_next.distance(&phi_x, ny) / (1.0 + phi_x.norm(ny));
        if inversion_defect > INVERSION_TOL {
            let detail = format!("H1: inversion defect {inversion_defect:e} at step {j}");
            return Err(SolveError::InversionDefect { step: j, defect: inversion_defect, trace: fail(trace, detail) });
        }
        if step_norm > budget + DISTANCE_TOL || deviation > tau_next - tau0 + DISTANCE_TOL {
            let detail = format!("step {step_norm:e} vs {budget:e}, deviation {deviation:e} vs {:e}", tau_next - tau0);
            return Err(SolveError::DistanceBound { step: j, detail: detail.clone(), trace: fail(trace, detail) });
        }

        phi_x = p.phi.evaluate(&x_next);
        residual = phi_x.distance(&psi_next, ny);
        x = x_next;
        tau = tau_next;
        j += 1;
        trace.records.push(TraceRecord { j, tau, x: x.clone(), step_norm, deviation, residual, inversion_defect });
    }

    Ok(Solution { x_star: x, tau_star, trace, h2_report })
}

/// Solves independent instances, in parallel when `exec` allows.
pub fn solve_batch(
    instances: &[ProblemInstance],
    opts: &SolveOptions,
    exec: Execution,
) -> Vec<Result<Solution, SolveError>> {
    map_slice(instances, exec, |p| coincidence_solve_with(p, opts))
}

/// A single sample of the derivative check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H2Sample {
    pub tau: f64,
    pub derivative_norm: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct H2Report {
    pub samples: usize,
    pub violations: usize,
    /// Largest `‖Φ′(x)‖ / φ′(τ)` seen.
    pub max_ratio: f64,
    pub worst: Option<H2Sample>,
}

impl H2Report {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Samples `τ ∈ [τ0, τ*]` and `x` with `‖x − x0‖ ≤ τ − τ0`, and checks
/// `‖Φ′(x)‖ ≤ φ′(τ)` in the operator norm subordinate to the problem norms.
pub fn validate_h2_derivative(p: &ProblemInstance, opts: &AuditOptions) -> Result<H2Report, MajorantError> {
    let tau_star = smallest_crossing(&p.majorants)?;
    Ok(h2_report_with_star(p, tau_star, opts))
}

fn h2_report_with_star(p: &ProblemInstance, tau_star: f64, opts: &AuditOptions) -> H2Report {
    let (nx, ny) = p.norms();
    let tau0 = p.majorants.tau0();
    let samples = map_indexed(opts.trials, opts.execution, |i| {
        let mut rng = trial_rng(opts.seed, i);
        let tau = tau0 + (tau_star - tau0) * rng.random::<f64>();
        let x = point_in_ball(&mut rng, &p.x0, tau - tau0, nx);
        let derivative_norm = operator_norm(&p.phi.jacobian(&x), nx, ny);
        H2Sample { tau, derivative_norm, bound: p.majorants.phi_derivative(tau) }
    });
    let mut report = H2Report { samples: opts.trials, violations: 0, max_ratio: 0.0, worst: None };
    for s in samples {
        let ratio = if s.bound > 0.0 {
            s.derivative_norm / s.bound
        } else if s.derivative_norm > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if s.derivative_norm > s.bound * (1.0 + H2_REL_TOL) {
            report.violations += 1;
        }
        if ratio > report.max_ratio || report.worst.is_none() {
            report.max_ratio = report.max_ratio.max(ratio);
            report.worst = Some(s);
        }
    }
    report
}

/// Largest excess over each per-step bound in a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCertificate {
    /// `max_j ‖x_j − x0‖ − (τ_j − τ0)`.
    pub deviation_excess: f64,
    /// `max_j ‖x_{j+1} − x_j‖ − (τ_{j+1} − τ_j)`.
    pub step_excess: f64,
    /// `max_j ‖Ψ(x_{j+1}) − Φ(x_j)‖ / (1 + ‖Φ(x_j)‖)`.
    pub inversion_defect: f64,
    /// `max_j ‖Φ(x_j) − Ψ(x_j)‖ − (ψ(τ_{j+1}) − ψ(τ_j))`.
    pub residual_excess: f64,
}

impl StepCertificate {
    pub fn holds(&self) -> bool {
        self.deviation_excess <= DISTANCE_TOL
            && self.step_excess <= DISTANCE_TOL
            && self.inversion_defect <= INVERSION_TOL
            && self.residual_excess <= MAJORIZATION_TOL
    }
}

/// Recomputes every per-step bound from a finished trace.
pub fn certify_trace(trace: &IterateTrace, majorants: &MajorantPair) -> StepCertificate {
    let mut cert = StepCertificate {
        deviation_excess: f64::NEG_INFINITY,
        step_excess: f64::NEG_INFINITY,
        inversion_defect: 0.0,
        residual_excess: f64::NEG_INFINITY,
    };
    for r in &trace.records {
        cert.deviation_excess = cert.deviation_excess.max(r.deviation - (r.tau - trace.tau0));
        cert.inversion_defect = cert.inversion_defect.max(r.inversion_defect);
    }
    for pair in trace.records.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        cert.step_excess = cert.step_excess.max(next.step_norm - (next.tau - prev.tau));
        let allowed = majorants.psi(next.tau) - majorants.psi(prev.tau);
        cert.residual_excess = cert.residual_excess.max(prev.residual - allowed);
    }
    cert
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateRegime {
    Geometric,
    Sublinear,
}

impl fmt::Display for RateRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateRegime::Geometric => "Geometric",
            RateRegime::Sublinear => "Sublinear",
        })
    }
}

/// Convergence-rate fit of a trace's step norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub regime: RateRegime,
    /// Ratio `exp(slope)` for geometric decay, power-law exponent otherwise.
    pub value: f64,
    pub sse_geometric: f64,
    pub sse_power: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("rate estimate needs at least {needed} steps, trace has {found}")]
    InsufficientData { needed: usize, found: usize },
}

pub const MIN_RATE_STEPS: usize = 20;

/// Fits `log ‖x_j − x_{j−1}‖` over the second half of the trace against `j`
/// (geometric decay) and against `log j` (power law), keeping the fit with
/// the smaller squared error.
pub fn rate_estimate(trace: &IterateTrace) -> Result<RateEstimate, RateError> {
    let steps = trace.steps();
    if steps < MIN_RATE_STEPS {
        return Err(RateError::InsufficientData { needed: MIN_RATE_STEPS, found: steps });
    }
    let points: Vec<(f64, f64)> = trace
        .records
        .iter()
        .skip(1)
        .filter(|r| r.step_norm > 0.0 && r.step_norm.is_finite())
        .map(|r| (r.j as f64, r.step_norm.ln()))
        .collect();
    let tail = &points[points.len() / 2..];
    if tail.len() < 3 {
        return Err(RateError::InsufficientData { needed: MIN_RATE_STEPS, found: points.len() });
    }
    let (geo_slope, sse_geometric) = fit_line(tail.iter().copied());
    let (pow_slope, sse_power) = fit_line(tail.iter().map(|&(j, y)| (j.ln(), y)));
    Ok(if sse_geometric <= sse_power {
        RateEstimate { regime: RateRegime::Geometric, value: geo_slope.exp(), sse_geometric, sse_power }
    } else {
        RateEstimate { regime: RateRegime::Sublinear, value: pow_slope, sse_geometric, sse_power }
    })
}

/// Least-squares line through the points; returns (slope, residual sum of squares).
fn fit_line(points: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy) = points.clone().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx).powi(2), b + (x - mx) * (y - my)));
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let sse = points.map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    (slope, sse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::{IdentityCovering, LinearSurjectiveCovering, Sign};
    use crate::linalg::Matrix;
    use crate::majorant::{Radius, ScalarFn};
    use crate::maps::{AffineMap, ScalarPolynomial};

    fn scalar_quadratic(c: f64) -> ProblemInstance {
        let phi = Arc::new(ScalarPolynomial::new(vec![c, 0.0, 1.0]));
        let cover = Arc::new(LinearSurjectiveCovering::new(Matrix::from_diagonal(&[2.0]), Sign::Negative).unwrap());
        let pair = MajorantPair::new(
            ScalarFn::linear(2.0, 0.0),
            ScalarFn::polynomial(vec![c, 0.0, 1.0]),
            0.0,
            Radius::Unbounded,
        )
        .unwrap();
        ProblemInstance::new(phi, cover, pair, Vector::zeros(1)).unwrap()
    }

    fn affine_kantorovich() -> ProblemInstance {
        let phi = Arc::new(AffineMap::new(Matrix::from_diagonal(&[0.5]), Vector::from(vec![0.5])));
        let cover = Arc::new(IdentityCovering::new(1, NormTag::L2));
        let pair =
            MajorantPair::new(ScalarFn::linear(1.0, 0.0), ScalarFn::linear(0.5, 0.5), 0.0, Radius::Unbounded).unwrap();
        ProblemInstance::new(phi, cover, pair, Vector::zeros(1)).unwrap()
    }

    #[test]
    fn scalar_quadratic_positive_discriminant() {
        let p = scalar_quadratic(0.75);
        let sol = coincidence_solve(&p, 1e-10, 60).unwrap();
        assert!(sol.converged());
        assert!((sol.x_star[0] + 0.5).abs() < 1e-10);
        assert!(sol.x_star[0].abs() <= sol.tau_star + 1e-8);
        // oracle: x_{j+1} = −(x_j² + 0.75)/2
        let mut x = 0.0_f64;
        for r in &sol.trace.records {
            assert!((r.x[0] - x).abs() < 1e-15, "j = {}", r.j);
            x = -(x * x + 0.75) / 2.0;
        }
        assert!(certify_trace(&sol.trace, p.majorants()).holds());
        let rate = rate_estimate(&sol.trace).unwrap();
        assert_eq!(rate.regime, RateRegime::Geometric);
        assert!((rate.value - 0.5).abs() < 0.05, "{rate:?}");
    }

    #[test]
    fn kantorovich_affine_fixed_point() {
        let sol = coincidence_solve(&affine_kantorovich(), 1e-10, 1000).unwrap();
        assert!((sol.x_star[0] - 1.0).abs() < 1e-9);
        assert!((sol.tau_star - 1.0).abs() < 1e-15);
        let rate = rate_estimate(&sol.trace).unwrap();
        assert_eq!(rate.regime, RateRegime::Geometric);
        assert!((rate.value - 0.5).abs() < 0.01);
    }

    #[test]
    fn degenerate_quadratic_is_sublinear() {
        let p = scalar_quadratic(1.0);
        let sol = coincidence_solve(&p, 1e-10, 2000).unwrap();
        assert_eq!(sol.trace.status, TraceStatus::MaxSteps);
        for r in sol.trace.records.iter().filter(|r| r.j >= 100) {
            let e = r.x[0] + 1.0;
            assert!((1.5..=2.5).contains(&(r.j as f64 * e)), "j = {}, e = {e}", r.j);
        }
        let rate = rate_estimate(&sol.trace).unwrap();
        assert_eq!(rate.regime, RateRegime::Sublinear);
        assert!((rate.value + 2.0).abs() < 0.1, "{rate:?}");
        assert!(certify_trace(&sol.trace, p.majorants()).holds());
    }

    #[test]
    fn h2_start_is_enforced() {
        let phi = Arc::new(ScalarPolynomial::new(vec![1.1, 0.0, 1.0]));
        let cover = Arc::new(LinearSurjectiveCovering::new(Matrix::from_diagonal(&[2.0]), Sign::Negative).unwrap());
        let pair = MajorantPair::new(
            ScalarFn::linear(2.0, 0.0),
            ScalarFn::polynomial(vec![1.0, 0.0, 1.0]),
            0.0,
            Radius::Unbounded,
        )
        .unwrap();
        let err = ProblemInstance::new(phi, cover, pair, Vector::zeros(1)).unwrap_err();
        assert!(matches!(err, SolveError::H2Start { .. }));
        assert_eq!(err.hypothesis(), Hypothesis::H2);
    }

    #[test]
    fn h2_derivative_checks() {
        let opts = AuditOptions::new(500);
        assert!(validate_h2_derivative(&scalar_quadratic(0.75), &opts).unwrap().passed());

        // constant Φ: Φ′ = 0
        let phi = Arc::new(AffineMap::constant(1, Vector::from(vec![0.2])));
        let cover = Arc::new(IdentityCovering::new(1, NormTag::L2));
        let pair =
            MajorantPair::new(ScalarFn::linear(1.0, 0.0), ScalarFn::linear(0.1, 0.2), 0.0, Radius::Unbounded).unwrap();
        let constant = ProblemInstance::new(phi, cover, pair, Vector::zeros(1)).unwrap();
        assert!(validate_h2_derivative(&constant, &opts).unwrap().passed());

        // φ′ scaled by 0.9 undersizes ‖Φ′(x)‖ = 2|x| near the edge of the ball
        let phi = Arc::new(ScalarPolynomial::new(vec![0.75, 0.0, 1.0]));
        let cover = Arc::new(LinearSurjectiveCovering::new(Matrix::from_diagonal(&[2.0]), Sign::Negative).unwrap());
        let pair = MajorantPair::new(
            ScalarFn::linear(2.0, 0.0),
            ScalarFn::polynomial(vec![0.75, 0.0, 0.9]),
            0.0,
            Radius::Unbounded,
        )
        .unwrap();
        let undersized = ProblemInstance::new(phi, cover, pair, Vector::zeros(1)).unwrap();
        let report = validate_h2_derivative(&undersized, &opts).unwrap();
        assert!(report.violations > 0);
        let strict = SolveOptions { h2_check: H2Check::Strict, ..SolveOptions::default() };
        assert!(matches!(coincidence_solve_with(&undersized, &strict), Err(SolveError::H2Derivative(_))));
    }

    #[test]
    fn rate_estimate_needs_twenty_steps() {
        let sol = coincidence_solve(&scalar_quadratic(0.75), 1e-3, 100).unwrap();
        assert!(matches!(rate_estimate(&sol.trace), Err(RateError::InsufficientData { .. })));
    }

    #[test]
    fn residual_sequence_is_monotone_for_quadratics() {
        for c in [0.75, 1.0] {
            let sol = coincidence_solve(&scalar_quadratic(c), 1e-10, 500).unwrap();
            for w in sol.trace.records.windows(2) {
                assert!(w[1].residual <= w[0].residual + 1e-12);
            }
        }
    }

    #[test]
    fn broken_covering_is_reported_with_trace() {
        // claims b = 4 for Ψ(x) = −2x: every correction needs twice its budget
        let phi = Arc::new(ScalarPolynomial::new(vec![0.75, 0.0, 1.0]));
        let cover = Arc::new(
            LinearSurjectiveCovering::with_constant(
                Matrix::from_diagonal(&[2.0]),
                Sign::Negative,
                4.0,
                (NormTag::L2, NormTag::L2),
            )
            .unwrap(),
        );
        let pair = MajorantPair::new(
            ScalarFn::linear(4.0, 0.0),
            ScalarFn::polynomial(vec![0.75, 0.0, 1.0]),
            0.0,
            Radius::Unbounded,
        )
        .unwrap();
        let p = ProblemInstance::new(phi, cover, pair, Vector::zeros(1)).unwrap();
        let err = coincidence_solve(&p, 1e-10, 100).unwrap_err();
        assert!(matches!(err, SolveError::BudgetExceeded { step: 0, .. }), "{err:?}");
        assert_eq!(err.hypothesis(), Hypothesis::H1);
        assert_eq!(err.partial_trace().unwrap().records.len(), 1);
    }
}
