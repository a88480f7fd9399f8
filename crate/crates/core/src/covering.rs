//! Covering maps.
//!
//! A map Ψ with modulus ψ is a ψ-covering when every ball
//! `B̄(Ψ(x′), ψ(τ″) − ψ(τ′))` in Y lies inside `Ψ(B̄(x′, τ″ − τ′))`.
//! Implementations realise this constructively through
//! [`CoveringMap::solve_within`]: given a target `y` inside the image ball
//! they return a preimage within the radius budget.

use rand::Rng;
use thiserror::Error;

use crate::exec::{map_indexed, trial_rng, AuditOptions};
use crate::linalg::{LinalgError, Matrix, NormTag, RowSpaceSvd, Vector};
use crate::majorant::ScalarFn;
use crate::sampling::point_in_ball;

/// Allowed overshoot of the radius budget in `solve_within`.
pub const BUDGET_SLACK: f64 = 1e-9;
/// Audit threshold for both the relative residual and the budget overshoot.
pub const AUDIT_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoveringError {
    #[error("preimage needs radius {needed}, budget is {budget}")]
    BudgetExceeded { needed: f64, budget: f64, candidate: Vector },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("covering constant must be positive and finite, got {0}")]
    InvalidConstant(f64),
    #[error("covering constant for {x}/{y} norms must be supplied explicitly")]
    ConstantRequired { x: NormTag, y: NormTag },
}

/// A ψ-covering `Ψ: X → Y` with constructive local inversion.
pub trait CoveringMap: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    /// Norms on (X, Y).
    fn norms(&self) -> (NormTag, NormTag);
    fn evaluate(&self, x: &Vector) -> Vector;
    /// The covering modulus ψ.
    fn modulus(&self) -> &ScalarFn;
    /// A point `x` with `Ψ(x) = y` and `‖x − x′‖_X ≤ budget`.
    ///
    /// Callers guarantee `‖y − Ψ(x′)‖_Y ≤ ψ(τ″) − ψ(τ′)` with
    /// `budget = τ″ − τ′`; a correction longer than `budget + BUDGET_SLACK`
    /// is reported as `BudgetExceeded` together with the candidate.
    fn solve_within(&self, x_prime: &Vector, y: &Vector, budget: f64) -> Result<Vector, CoveringError>;
}

/// Sign in `Ψ(x) = ±Bx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// `Ψ(x) = ±Bx` for a surjective `B`, with modulus `ψ(τ) = bτ`.
///
/// Preimages are the minimal-ℓ2-norm corrections, so with Euclidean norms
/// `‖Δ‖ ≤ ‖y − Ψ(x′)‖ / σ_min(B)`.
#[derive(Debug, Clone)]
pub struct LinearSurjectiveCovering {
    matrix: Matrix,
    sign: Sign,
    constant: f64,
    norms: (NormTag, NormTag),
    factor: RowSpaceSvd,
    modulus: ScalarFn,
}

impl LinearSurjectiveCovering {
    /// Euclidean norms on both sides with `b = σ_min(B)`.
    pub fn new(matrix: Matrix, sign: Sign) -> Result<Self, CoveringError> {
        let factor = RowSpaceSvd::new(&matrix)?;
        let b = factor.smallest_singular_value();
        Self::assemble(matrix, sign, b, (NormTag::L2, NormTag::L2), factor)
    }

    /// Any norms with a user-supplied constant `b`. The constant is not
    /// checked here; audit it with [`verify_covering_sampled`].
    pub fn with_constant(matrix: Matrix, sign: Sign, b: f64, norms: (NormTag, NormTag)) -> Result<Self, CoveringError> {
        let factor = RowSpaceSvd::new(&matrix)?;
        Self::assemble(matrix, sign, b, norms, factor)
    }

    /// `b = σ_min(B)` when both norms are ℓ2; other norm pairs need an
    /// explicit constant.
    pub fn with_default_constant(matrix: Matrix, sign: Sign, norms: (NormTag, NormTag)) -> Result<Self, CoveringError> {
        if norms != (NormTag::L2, NormTag::L2) {
            return Err(CoveringError::ConstantRequired { x: norms.0, y: norms.1 });
        }
        Self::new(matrix, sign)
    }

    fn assemble(
        matrix: Matrix,
        sign: Sign,
        b: f64,
        norms: (NormTag, NormTag),
        factor: RowSpaceSvd,
    ) -> Result<Self, CoveringError> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(CoveringError::InvalidConstant(b));
        }
        Ok(LinearSurjectiveCovering { matrix, sign, constant: b, norms, factor, modulus: ScalarFn::linear(b, 0.0) })
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn smallest_singular_value(&self) -> f64 {
        self.factor.smallest_singular_value()
    }
}

impl CoveringMap for LinearSurjectiveCovering {
    fn dim_x(&self) -> usize {
        self.matrix.cols()
    }

    fn dim_y(&self) -> usize {
        self.matrix.rows()
    }

    fn norms(&self) -> (NormTag, NormTag) {
        self.norms
    }

    fn evaluate(&self, x: &Vector) -> Vector {
        self.matrix.mul_vec(x).scaled(self.sign.factor())
    }

    fn modulus(&self) -> &ScalarFn {
        &self.modulus
    }

    fn solve_within(&self, x_prime: &Vector, y: &Vector, budget: f64) -> Result<Vector, CoveringError> {
        if y.dim() != self.dim_y() {
            return Err(LinalgError::DimensionMismatch { expected: self.dim_y(), found: y.dim() }.into());
        }
        let defect = y - &self.evaluate(x_prime);
        let delta = self.factor.solve(&defect.scaled(self.sign.factor()))?;
        let needed = delta.norm(self.norms.0);
        let candidate = x_prime + &delta;
        if needed > budget + BUDGET_SLACK {
            return Err(CoveringError::BudgetExceeded { needed, budget, candidate });
        }
        Ok(candidate)
    }
}

/// `Ψ(x) = x` with `ψ(τ) = τ`.
#[derive(Debug, Clone)]
pub struct IdentityCovering {
    dim: usize,
    norm: NormTag,
    modulus: ScalarFn,
}

impl IdentityCovering {
    pub fn new(dim: usize, norm: NormTag) -> Self {
        IdentityCovering { dim, norm, modulus: ScalarFn::linear(1.0, 0.0) }
    }
}

impl CoveringMap for IdentityCovering {
    fn dim_x(&self) -> usize {
        self.dim
    }

    fn dim_y(&self) -> usize {
        self.dim
    }

    fn norms(&self) -> (NormTag, NormTag) {
        (self.norm, self.norm)
    }

    fn evaluate(&self, x: &Vector) -> Vector {
        x.clone()
    }

    fn modulus(&self) -> &ScalarFn {
        &self.modulus
    }

    fn solve_within(&self, x_prime: &Vector, y: &Vector, budget: f64) -> Result<Vector, CoveringError> {
        if y.dim() != self.dim {
            return Err(LinalgError::DimensionMismatch { expected: self.dim, found: y.dim() }.into());
        }
        let needed = y.distance(x_prime, self.norm);
        if needed > budget + BUDGET_SLACK {
            return Err(CoveringError::BudgetExceeded { needed, budget, candidate: y.clone() });
        }
        Ok(y.clone())
    }
}

/// Outcome of a randomized audit of the covering contract.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringAudit {
    pub trials: usize,
    pub violations: usize,
    /// Largest `‖Ψ(x) − y‖ / (1 + ‖y‖)` over all trials.
    pub max_residual: f64,
    /// Largest `‖x − x′‖ − budget`, clamped at zero.
    pub max_overshoot: f64,
    pub worst_trial: Option<usize>,
}

impl CoveringAudit {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct TrialOutcome {
    residual: f64,
    overshoot: f64,
}

/// Draws `x′` in `B̄(center, radius)`, `0 ≤ τ′ < τ″ ≤ 2·radius`, and a target
/// `y` in `B̄(Ψ(x′), ψ(τ″) − ψ(τ′))`, then checks that `solve_within` returns
/// an exact preimage within `τ″ − τ′`.
pub fn verify_covering_sampled(
    cover: &dyn CoveringMap,
    center: &Vector,
    radius: f64,
    opts: &AuditOptions,
) -> CoveringAudit {
    let (nx, ny) = cover.norms();
    let outcomes = map_indexed(opts.trials, opts.execution, |i| {
        let mut rng = trial_rng(opts.seed, i);
        let x_prime = point_in_ball(&mut rng, center, radius, nx);
        let tau_lo = radius * rng.random::<f64>();
        let budget = radius * (1.0 - rng.random::<f64>());
        let psi = cover.modulus();
        let increment = psi.eval(tau_lo + budget) - psi.eval(tau_lo);
        let y = point_in_ball(&mut rng, &cover.evaluate(&x_prime), increment, ny);
        let y_scale = 1.0 + y.norm(ny);
        let residual_of = |x: &Vector| cover.evaluate(x).distance(&y, ny) / y_scale;
        match cover.solve_within(&x_prime, &y, budget) {
            Ok(x) => {
                TrialOutcome { residual: residual_of(&x), overshoot: (x.distance(&x_prime, nx) - budget).max(0.0) }
            }
            Err(CoveringError::BudgetExceeded { needed, budget, candidate }) => {
                TrialOutcome { residual: residual_of(&candidate), overshoot: needed - budget }
            }
            Err(_) => TrialOutcome { residual: f64::INFINITY, overshoot: f64::INFINITY },
        }
    });

    let mut audit =
        CoveringAudit { trials: opts.trials, violations: 0, max_residual: 0.0, max_overshoot: 0.0, worst_trial: None };
    let mut worst = 0.0_f64;
    for (i, o) in outcomes.iter().enumerate() {
        audit.max_residual = audit.max_residual.max(o.residual);
        audit.max_overshoot = audit.max_overshoot.max(o.overshoot);
        if o.residual > AUDIT_TOL || o.overshoot > AUDIT_TOL {
            audit.violations += 1;
            let badness = o.residual.max(o.overshoot);
            if audit.worst_trial.is_none() || badness > worst {
                worst = badness;
                audit.worst_trial = Some(i);
            }
        }
    }
    audit
}
