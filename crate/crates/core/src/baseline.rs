//! The α-covering successive approximation, kept for rate comparison.
//!
//! With `u` an α-covering and `v` β-Lipschitz, the iteration
//! `u(x_{i+1}) = v(x_i)` contracts step lengths by `β/α` whenever `β < α`.
//! For the quadratic problem, `α = b` and `β = 2aτ*`, so the degenerate case
//! `D = 0` sits exactly on the boundary `β = α` where this scheme has
//! nothing to say while the majorant iteration still converges.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::covering::{CoveringError, CoveringMap};
use crate::exec::{map_indexed, trial_rng, AuditOptions};
use crate::linalg::{NormTag, Vector};
use crate::maps::SmoothMap;
use crate::problems::{build_quadratic_instance, ProblemError, QuadraticProblem};
use crate::sampling::point_in_ball;
use crate::solver::{
    coincidence_solve, rate_estimate, IterateTrace, RateEstimate, SolveError, TraceRecord, TraceStatus,
};

/// Slack on the step-ratio bound `β/α`.
pub const RATIO_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone)]
pub enum BaselineError {
    #[error("NotContractive: β = {beta} ≥ α = {alpha}")]
    NotContractive { alpha: f64, beta: f64 },
    #[error("BudgetExceeded at step {step}: needed {needed}, budget {budget}")]
    BudgetExceeded { step: usize, needed: f64, budget: f64, trace: Box<IterateTrace> },
    #[error("invalid constant: {0}")]
    InvalidConstant(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Covering(#[from] CoveringError),
}

/// `u(x) = v(x)` with `u` an α-covering and `v` β-Lipschitz on the working
/// ball `‖x − center‖ ≤ radius`.
#[derive(Clone)]
pub struct AlphaCoveringProblem {
    u: Arc<dyn CoveringMap>,
    v: Arc<dyn SmoothMap>,
    alpha: f64,
    beta: f64,
    center: Vector,
    radius: f64,
}

impl fmt::Debug for AlphaCoveringProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlphaCoveringProblem")
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("center", &self.center)
            .field("radius", &self.radius)
            .finish()
    }
}

impl AlphaCoveringProblem {
    /// `α` is read off the covering's linear modulus `ψ(τ) = ατ`.
    pub fn new(
        u: Arc<dyn CoveringMap>,
        v: Arc<dyn SmoothMap>,
        beta: f64,
        center: Vector,
        radius: f64,
    ) -> Result<Self, BaselineError> {
        if u.dim_x() != v.dim_in() || u.dim_y() != v.dim_out() || center.dim() != u.dim_x() {
            return Err(BaselineError::Dimension(format!(
                "u: R^{} → R^{}, v: R^{} → R^{}, center in R^{}",
                u.dim_x(),
                u.dim_y(),
                v.dim_in(),
                v.dim_out(),
                center.dim()
            )));
        }
        let psi = u.modulus();
        let alpha = psi.eval(1.0) - psi.eval(0.0);
        if !(alpha > 0.0 && alpha.is_finite()) || psi.eval(0.0) != 0.0 {
            return Err(BaselineError::InvalidConstant(format!("modulus {} is not ατ with α > 0", psi.label())));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(BaselineError::InvalidConstant(format!("β = {beta}")));
        }
        if radius.is_nan() || radius < 0.0 {
            return Err(BaselineError::InvalidConstant(format!("radius = {radius}")));
        }
        Ok(AlphaCoveringProblem { u, v, alpha, beta, center, radius })
    }

    /// Like [`new`](Self::new) with `β` estimated by sampling the ball.
    pub fn with_estimated_beta(
        u: Arc<dyn CoveringMap>,
        v: Arc<dyn SmoothMap>,
        center: Vector,
        radius: f64,
        opts: &AuditOptions,
    ) -> Result<Self, BaselineError> {
        let beta = estimate_lipschitz(v.as_ref(), &center, radius, u.norms(), opts);
        Self::new(u, v, beta, center, radius)
    }

    /// `u = −B`, `v = A(x, x) + C` on `‖x‖ ≤ τ*` with `α = b` and the
    /// analytic `β = 2aτ*`.
    pub fn from_quadratic(q: &QuadraticProblem) -> Result<Self, ProblemError> {
        let tau_star = q.tau_star();
        let cover: Arc<dyn CoveringMap> = Arc::new(q.covering()?);
        let v: Arc<dyn SmoothMap> = Arc::new(q.phi_map());
        let dim = q.tensor().dim_x();
        Self::new(cover, v, 2.0 * q.a() * tau_star, Vector::zeros(dim), tau_star)
            .map_err(|e| ProblemError::InvalidConstant(e.to_string()))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn applicable(&self) -> bool {
        self.beta < self.alpha
    }

    pub fn contraction(&self) -> f64 {
        self.beta / self.alpha
    }

    pub fn residual_at(&self, x: &Vector) -> f64 {
        self.v.evaluate(x).distance(&self.u.evaluate(x), self.u.norms().1)
    }
}

/// Largest sampled `‖v(x1) − v(x2)‖ / ‖x1 − x2‖` over pairs in the ball.
pub fn estimate_lipschitz(
    v: &dyn SmoothMap,
    center: &Vector,
    radius: f64,
    norms: (NormTag, NormTag),
    opts: &AuditOptions,
) -> f64 {
    let (nx, ny) = norms;
    map_indexed(opts.trials, opts.execution, |i| {
        let mut rng = trial_rng(opts.seed, i);
        let x1 = point_in_ball(&mut rng, center, radius, nx);
        let x2 = point_in_ball(&mut rng, center, radius, nx);
        let gap = x1.distance(&x2, nx);
        if gap > 0.0 {
            v.evaluate(&x1).distance(&v.evaluate(&x2), ny) / gap
        } else {
            0.0
        }
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// Iterates `u(x_{i+1}) = v(x_i)` from `x0` with budgets
/// `‖v(x_i) − u(x_i)‖/α`; the trace's `tau` column accumulates the budgets.
pub fn alpha_iterate(
    p: &AlphaCoveringProblem,
    x0: &Vector,
    tol: f64,
    max_steps: usize,
) -> Result<(Vector, IterateTrace), BaselineError> {
    if !p.applicable() {
        return Err(BaselineError::NotContractive { alpha: p.alpha, beta: p.beta });
    }
    let (nx, ny) = p.u.norms();
    let mut x = x0.clone();
    let mut v_x = p.v.evaluate(&x);
    let mut residual = v_x.distance(&p.u.evaluate(&x), ny);
    let mut tau = 0.0;
    let mut trace = IterateTrace {
        tau0: 0.0,
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

    for j in 0.. {
        if residual <= tol {
            trace.status = TraceStatus::Converged;
            break;
        }
        if j == max_steps {
            break;
        }
        let budget = residual / p.alpha;
        let x_next = match p.u.solve_within(&x, &v_x, budget) {
            Ok(x_next) => x_next,
            Err(CoveringError::BudgetExceeded { needed, budget, .. }) => {
                trace.status = TraceStatus::HypothesisViolation(format!("budget exceeded at step {j}"));
                return Err(BaselineError::BudgetExceeded { step: j, needed, budget, trace: Box::new(trace) });
            }
            Err(e) => return Err(e.into()),
        };
        let u_next = p.u.evaluate(&x_next);
        let inversion_defect = u_next.distance(&v_x, ny) / (1.0 + v_x.norm(ny));
        let step_norm = x_next.distance(&x, nx);
        tau += budget;
        v_x = p.v.evaluate(&x_next);
        residual = v_x.distance(&u_next, ny);
        x = x_next;
        trace.records.push(TraceRecord {
            j: j + 1,
            tau,
            x: x.clone(),
            step_norm,
            deviation: x.distance(x0, nx),
            residual,
            inversion_defect,
        });
    }
    Ok((x, trace))
}

/// Largest consecutive step-norm ratio `s_{i+1}/s_i` over a trace, skipping
/// pairs with a zero denominator.
pub fn max_step_ratio(trace: &IterateTrace) -> Option<f64> {
    trace.step_norms().windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).reduce(f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MethodStatus {
    Converged,
    MaxSteps,
    NotContractive,
    Failed(String),
}

impl fmt::Display for MethodStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodStatus::Converged => f.write_str("Converged"),
            MethodStatus::MaxSteps => f.write_str("MaxSteps"),
            MethodStatus::NotContractive => f.write_str("NotContractive"),
            MethodStatus::Failed(why) => write!(f, "Failed({why})"),
        }
    }
}

impl From<&TraceStatus> for MethodStatus {
    fn from(status: &TraceStatus) -> Self {
        match status {
            TraceStatus::Converged => MethodStatus::Converged,
            TraceStatus::MaxSteps => MethodStatus::MaxSteps,
            TraceStatus::HypothesisViolation(why) => MethodStatus::Failed(why.clone()),
        }
    }
}

/// One method's outcome inside a [`Comparison`].
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: &'static str,
    pub status: MethodStatus,
    pub trace: Option<IterateTrace>,
    pub x_star: Option<Vector>,
    pub rate: Option<RateEstimate>,
}

impl MethodRun {
    pub fn steps(&self) -> usize {
        self.trace.as_ref().map_or(0, IterateTrace::steps)
    }

    fn from_trace(method: &'static str, x: Vector, trace: IterateTrace) -> Self {
        MethodRun {
            method,
            status: MethodStatus::from(&trace.status),
            rate: rate_estimate(&trace).ok(),
            x_star: Some(x),
            trace: Some(trace),
        }
    }

    fn failed(method: &'static str, why: String, trace: Option<IterateTrace>) -> Self {
        MethodRun { method, status: MethodStatus::Failed(why), trace, x_star: None, rate: None }
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub alpha: f64,
    pub beta: f64,
    pub applicable: bool,
    pub discriminant: f64,
    pub majorant: MethodRun,
    pub baseline: MethodRun,
}

/// Runs both schemes on the same quadratic instance.
pub fn compare_methods(q: &QuadraticProblem, tol: f64, max_steps: usize) -> Result<Comparison, ProblemError> {
    let instance = build_quadratic_instance(q)?;
    let majorant = match coincidence_solve(&instance, tol, max_steps) {
        Ok(sol) => MethodRun::from_trace("majorant", sol.x_star, sol.trace),
        Err(e) => failed_majorant(e),
    };

    let alpha_problem = AlphaCoveringProblem::from_quadratic(q)?;
    let baseline = match alpha_iterate(&alpha_problem, instance.x0(), tol, max_steps) {
        Ok((x, trace)) => MethodRun::from_trace("baseline", x, trace),
        Err(BaselineError::NotContractive { .. }) => MethodRun {
            method: "baseline",
            status: MethodStatus::NotContractive,
            trace: None,
            x_star: None,
            rate: None,
        },
        Err(BaselineError::BudgetExceeded { trace, .. }) => {
            MethodRun::failed("baseline", "budget exceeded".into(), Some(*trace))
        }
        Err(e) => MethodRun::failed("baseline", e.to_string(), None),
    };

    Ok(Comparison {
        alpha: alpha_problem.alpha(),
        beta: alpha_problem.beta(),
        applicable: alpha_problem.applicable(),
        discriminant: q.discriminant(),
        majorant,
        baseline,
    })
}

fn failed_majorant(e: SolveError) -> MethodRun {
    let trace = e.partial_trace().cloned();
    MethodRun::failed("majorant", format!("{}: {e}", e.hypothesis()), trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covering::IdentityCovering;
    use crate::exec::Execution;
    use crate::linalg::Matrix;
    use crate::maps::AffineMap;
    use crate::problems::BilinearMap;

    fn scalar(a: f64, b: f64, c: f64) -> QuadraticProblem {
        let tensor = BilinearMap::new(1, 1, vec![a], a, (NormTag::L2, NormTag::L2)).unwrap();
        QuadraticProblem::new(tensor, Matrix::from_diagonal(&[b]), Vector::from(vec![c])).unwrap()
    }

    #[test]
    fn positive_discriminant_contracts_to_smaller_root() {
        let q = scalar(1.0, 2.0, 0.75);
        let p = AlphaCoveringProblem::from_quadratic(&q).unwrap();
        assert_eq!((p.alpha(), p.beta()), (2.0, 1.0));
        let (x, trace) = alpha_iterate(&p, &Vector::zeros(1), 1e-10, 200).unwrap();
        assert_eq!(trace.status, TraceStatus::Converged);
        assert!((x[0] + 0.5).abs() < 1e-10);
        assert!(max_step_ratio(&trace).unwrap() <= 0.5 + RATIO_TOL);
        assert!(p.residual_at(&x) <= 1e-10);
    }

    #[test]
    fn identity_banach_iteration() {
        let v = Arc::new(AffineMap::new(Matrix::from_diagonal(&[0.5, 0.5]), Vector::from(vec![1.0, -1.0])));
        let u = Arc::new(IdentityCovering::new(2, NormTag::L2));
        let p = AlphaCoveringProblem::new(u, v, 0.5, Vector::zeros(2), 10.0).unwrap();
        let (x, trace) = alpha_iterate(&p, &Vector::zeros(2), 1e-12, 200).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-11 && (x[1] + 2.0).abs() < 1e-11);
        for w in trace.step_norms().windows(2) {
            assert!((w[1] / w[0] - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn sampled_lipschitz_stays_below_analytic() {
        let q = scalar(1.0, 2.0, 0.75);
        let analytic = AlphaCoveringProblem::from_quadratic(&q).unwrap();
        let v: Arc<dyn SmoothMap> = Arc::new(q.phi_map());
        let u: Arc<dyn CoveringMap> = Arc::new(q.covering().unwrap());
        let opts = AuditOptions::new(2000).execution(Execution::Sequential);
        let sampled = AlphaCoveringProblem::with_estimated_beta(u, v, Vector::zeros(1), 0.5, &opts).unwrap();
        assert!(sampled.beta() <= analytic.beta() + 1e-12);
        assert!(sampled.beta() > 0.9);
    }

    #[test]
    fn degenerate_is_not_contractive() {
        let q = scalar(1.0, 2.0, 1.0);
        let p = AlphaCoveringProblem::from_quadratic(&q).unwrap();
        assert_eq!(p.beta(), p.alpha());
        assert!(matches!(alpha_iterate(&p, &Vector::zeros(1), 1e-10, 10), Err(BaselineError::NotContractive { .. })));
    }

    #[test]
    fn compare_examples() {
        let cmp = compare_methods(&scalar(1.0, 2.0, 0.75), 1e-10, 1000).unwrap();
        assert_eq!(cmp.majorant.status, MethodStatus::Converged);
        assert_eq!(cmp.baseline.status, MethodStatus::Converged);
        let (m, b) = (cmp.majorant.steps() as f64, cmp.baseline.steps() as f64);
        assert!(m <= 2.0 * b && b <= 2.0 * m);
        let gap = cmp.majorant.x_star.as_ref().unwrap()[0] - cmp.baseline.x_star.as_ref().unwrap()[0];
        assert!(gap.abs() < 1e-8);

        let cmp = compare_methods(&scalar(1.0, 2.0, 1.0), 1e-4, 100_000).unwrap();
        assert_eq!(cmp.baseline.status, MethodStatus::NotContractive);
        assert!(matches!(cmp.majorant.status, MethodStatus::Converged | MethodStatus::MaxSteps));
        assert!(cmp.majorant.trace.as_ref().unwrap().last().residual <= 1e-4);

        let cmp = compare_methods(&scalar(1.0, 2.0, 0.0), 1e-10, 10).unwrap();
        assert_eq!(cmp.majorant.steps(), 0);
        assert_eq!(cmp.baseline.steps(), 0);
        assert_eq!(cmp.majorant.x_star.unwrap()[0], 0.0);
    }
}
