//! Scalar majorants.
//!
//! A [`MajorantPair`] holds the covering modulus ψ and the derivative
//! majorant φ on `I = [τ0, τ0 + r)`. The vector iteration is steered by two
//! scalar objects built from it: the smallest crossing `τ*` of `ψ = φ`, and
//! the increasing sequence `τ_{j+1}` defined by `ψ(τ_{j+1}) = φ(τ_j)`, which
//! converges to `τ*` from below and supplies the step budgets.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Relative tolerance for scalar roots: `|ψ(τ) − φ(τ)| ≤ ROOT_TOL·(1 + |τ|)`.
pub const ROOT_TOL: f64 = 1e-12;
/// Cells in the left-to-right bracket scan for `τ*`.
pub const GRID_CELLS: usize = 10_000;
/// Grid points used to check monotonicity of ψ and φ.
pub const VALIDATION_POINTS: usize = 1_000;
/// Search bound used when `r` is unbounded.
pub const DEFAULT_HORIZON: f64 = 1e6;

const MAX_BISECTIONS: usize = 400;
const GOLDEN_ITERATIONS: usize = 200;

pub fn root_tol(tau: f64) -> f64 {
    ROOT_TOL * (1.0 + tau.abs())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MajorantError {
    #[error("ψ(τ) = φ(τ) has no solution on [{tau0}, {end}]")]
    NoCrossing { tau0: f64, end: f64 },
    #[error("root bracket failed at τ = {tau}: {detail}")]
    BracketFailure { tau: f64, detail: String },
    #[error("{which} is not strictly increasing near τ = {tau}")]
    NotIncreasing { which: &'static str, tau: f64 },
    #[error("φ(τ0) = {phi} is below ψ(τ0) = {psi}")]
    StartBelowCovering { psi: f64, phi: f64 },
    #[error("φ needs a derivative")]
    MissingDerivative,
    #[error("{which} is not finite at τ = {tau}")]
    NonFinite { which: &'static str, tau: f64 },
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
}

type Eval = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A black-box real function of one variable, with an optional derivative.
#[derive(Clone)]
pub struct ScalarFn {
    value: Eval,
    derivative: Option<Eval>,
    label: String,
}

impl ScalarFn {
    pub fn new(label: impl Into<String>, value: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn { value: Arc::new(value), derivative: None, label: label.into() }
    }

    pub fn with_derivative(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarFn { value: Arc::new(value), derivative: Some(Arc::new(derivative)), label: label.into() }
    }

    /// `slope·τ + intercept`.
    pub fn linear(slope: f64, intercept: f64) -> Self {
        ScalarFn::with_derivative(format!("{slope}*t + {intercept}"), move |t| slope * t + intercept, move |_| slope)
    }

    /// Polynomial with ascending coefficients, evaluated by Horner's rule.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        let label = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| match k {
                0 => format!("{c}"),
                1 => format!("{c}*t"),
                _ => format!("{c}*t^{k}"),
            })
            .collect::<Vec<_>>()
            .join(" + ");
        let dcoeffs: Vec<f64> = coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        ScalarFn::with_derivative(label, move |t| horner(&coeffs, t), move |t| horner(&dcoeffs, t))
    }

    pub fn eval(&self, tau: f64) -> f64 {
        (self.value)(tau)
    }

    pub fn derivative(&self, tau: f64) -> Option<f64> {
        self.derivative.as_ref().map(|d| d(tau))
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFn").field("label", &self.label).field("derivative", &self.derivative.is_some()).finish()
    }
}

pub(crate) fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Length `r` of the interval `I = [τ0, τ0 + r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    Finite(f64),
    Unbounded,
}

/// The pair (ψ, φ) on `[τ0, τ0 + r)`.
#[derive(Debug, Clone)]
pub struct MajorantPair {
    psi: ScalarFn,
    phi: ScalarFn,
    tau0: f64,
    radius: Radius,
    horizon: f64,
}

impl MajorantPair {
    pub fn new(psi: ScalarFn, phi: ScalarFn, tau0: f64, radius: Radius) -> Result<Self, MajorantError> {
        Self::with_horizon(psi, phi, tau0, radius, DEFAULT_HORIZON)
    }

    /// Validates the pair: φ has a derivative, both functions are finite and
    /// strictly increasing on a grid over the search span, and φ(τ0) ≥ ψ(τ0).
    pub fn with_horizon(
        psi: ScalarFn,
        phi: ScalarFn,
        tau0: f64,
        radius: Radius,
        horizon: f64,
    ) -> Result<Self, MajorantError> {
        if !tau0.is_finite() {
            return Err(MajorantError::InvalidInterval(format!("τ0 = {tau0}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(MajorantError::InvalidInterval(format!("horizon = {horizon}")));
        }
        if let Radius::Finite(r) = radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(MajorantError::InvalidInterval(format!("r = {r}")));
            }
        }
        if !phi.has_derivative() {
            return Err(MajorantError::MissingDerivative);
        }
        let pair = MajorantPair { psi, phi, tau0, radius, horizon };
        pair.check_monotone()?;
        let (psi0, phi0) = (pair.psi(tau0), pair.phi(tau0));
        if phi0 < psi0 - root_tol(psi0) {
            return Err(MajorantError::StartBelowCovering { psi: psi0, phi: phi0 });
        }
        Ok(pair)
    }

    fn check_monotone(&self) -> Result<(), MajorantError> {
        let span = self.span();
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=VALIDATION_POINTS {
            let t = self.tau0 + span * k as f64 / VALIDATION_POINTS as f64;
            let (p, f) = (self.psi(t), self.phi(t));
            if !p.is_finite() {
                return Err(MajorantError::NonFinite { which: "ψ", tau: t });
            }
            if !f.is_finite() {
                return Err(MajorantError::NonFinite { which: "φ", tau: t });
            }
            if let Some((pp, pf)) = prev {
                if p <= pp {
                    return Err(MajorantError::NotIncreasing { which: "ψ", tau: t });
                }
                if f <= pf {
                    return Err(MajorantError::NotIncreasing { which: "φ", tau: t });
                }
            }
            prev = Some((p, f));
        }
        Ok(())
    }

    pub fn psi(&self, tau: f64) -> f64 {
        self.psi.eval(tau)
    }

    pub fn phi(&self, tau: f64) -> f64 {
        self.phi.eval(tau)
    }

    pub fn phi_derivative(&self, tau: f64) -> f64 {
        self.phi.derivative(tau).expect("validated on construction")
    }

    pub fn psi_fn(&self) -> &ScalarFn {
        &self.psi
    }

    pub fn phi_fn(&self) -> &ScalarFn {
        &self.phi
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn radius(&self) -> Radius {
        self.radius
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Length of the searched interval, `min(r, horizon)`.
    pub fn span(&self) -> f64 {
        match self.radius {
            Radius::Finite(r) => r.min(self.horizon),
            Radius::Unbounded => self.horizon,
        }
    }

    fn gap(&self, tau: f64) -> f64 {
        self.psi(tau) - self.phi(tau)
    }
}

/// Bisection for a sign change of `g` on `[lo, hi]` with `g(lo) < 0 ≤ g(hi)`,
/// run to machine resolution. Returns the upper end, where `g ≥ 0`.
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Golden-section search for the maximum of `g` on `[lo, hi]`.
fn golden_max(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if hi - lo <= f64::EPSILON * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g(x1);
        }
    }
    if g1 >= g2 {
        (x1, g1)
    } else {
        (x2, g2)
    }
}

/// The least solution `τ*` of `ψ(τ) = φ(τ)` on `[τ0, τ0 + min(r, horizon)]`.
///
/// Scans a uniform grid left to right for the first point with `ψ ≥ φ` and
/// bisects the enclosing cell. A crossing can also hide between grid points
/// (a tangency, or two roots inside one cell); wherever the sampled gap
/// `ψ − φ` has a discrete local maximum the maximum is refined by golden
/// section, and a refined maximum within `root_tol` of zero counts as a
/// crossing.
pub fn smallest_crossing(p: &MajorantPair) -> Result<f64, MajorantError> {
    let g = |t: f64| p.gap(t);
    let tau0 = p.tau0;
    let span = p.span();
    let end = tau0 + span;
    let g0 = g(tau0);
    if g0 >= -root_tol(tau0) {
        return Ok(tau0);
    }
    let node = |k: usize| tau0 + span * k as f64 / GRID_CELLS as f64;

    // values[k % 3] holds g at node k for the sliding window k-2..=k
    let mut window = [g0, g0, g0];
    for k in 1..=GRID_CELLS {
        let t = node(k);
        let gk = g(t);
        if gk >= 0.0 {
            return Ok(bisect(g, node(k - 1), t));
        }
        // node k-1 is a discrete local max if it is no lower than both neighbours
        let prev = window[(k - 1) % 3];
        let before = if k >= 2 { window[(k - 2) % 3] } else { f64::NEG_INFINITY };
        if prev >= gk && prev >= before {
            let lo = node(k.saturating_sub(2));
            if let Some(root) = refine_hidden_crossing(&g, lo, t) {
                return Ok(root);
            }
        }
        window[k % 3] = gk;
    }
    Err(MajorantError::NoCrossing { tau0, end })
}

fn refine_hidden_crossing(g: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    let (arg, peak) = golden_max(g, lo, hi);
    if peak > 0.0 {
        // g(lo) < 0 since every earlier node was negative
        Some(bisect(g, lo, arg))
    } else if peak >= -root_tol(arg) {
        Some(arg)
    } else {
        None
    }
}

/// Next element of the τ-sequence: the `τ ∈ (τ_j, τ*]` with `ψ(τ) = φ(τ_j)`.
///
/// When `φ(τ_j)` already reaches `ψ(τ*)` the sequence has met the crossing to
/// working precision and `τ*` itself is returned.
pub fn next_tau(p: &MajorantPair, tau_j: f64, tau_star: f64) -> Result<f64, MajorantError> {
    let target = p.phi(tau_j);
    let psi_j = p.psi(tau_j);
    if psi_j > target + root_tol(target) {
        return Err(MajorantError::BracketFailure {
            tau: tau_j,
            detail: format!("ψ(τ_j) = {psi_j} exceeds φ(τ_j) = {target}; τ_j lies past a crossing"),
        });
    }
    if tau_j >= tau_star || p.psi(tau_star) <= target || psi_j >= target {
        return Ok(tau_star);
    }
    Ok(bisect(|t| p.psi(t) - target, tau_j, tau_star))
}

/// The sequence `τ_0 < τ_1 < …` with `ψ(τ_{j+1}) = φ(τ_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauSequence {
    pub taus: Vec<f64>,
    pub tau_star: f64,
    pub converged: bool,
}

/// Iterates [`next_tau`] until `τ* − τ_j ≤ tail_tol` or `max_steps` steps.
pub fn tau_sequence(p: &MajorantPair, max_steps: usize, tail_tol: f64) -> Result<TauSequence, MajorantError> {
    let tau_star = smallest_crossing(p)?;
    let mut taus = vec![p.tau0];
    let mut last = p.tau0;
    while taus.len() <= max_steps && tau_star - last > tail_tol {
        let next = next_tau(p, last, tau_star)?;
        if next <= last {
            break;
        }
        taus.push(next);
        last = next;
    }
    let converged = tau_star - last <= tail_tol;
    Ok(TauSequence { taus, tau_star, converged })
}

/// `true` iff the measured `‖Φ(x0) − Ψ(x0)‖` fits under `φ(τ0) − ψ(τ0)`.
pub fn validate_h2_start(p: &MajorantPair, initial_gap: f64) -> bool {
    initial_gap <= p.phi(p.tau0) - p.psi(p.tau0) + 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_pair(a: f64, b: f64, c: f64) -> MajorantPair {
        MajorantPair::new(ScalarFn::linear(b, 0.0), ScalarFn::polynomial(vec![c, 0.0, a]), 0.0, Radius::Unbounded)
            .unwrap()
    }

    fn affine_pair() -> MajorantPair {
        MajorantPair::new(ScalarFn::linear(1.0, 0.0), ScalarFn::linear(0.5, 0.5), 0.0, Radius::Unbounded).unwrap()
    }

    #[test]
    fn crossing_of_tangent_pair() {
        let t = smallest_crossing(&quadratic_pair(1.0, 2.0, 1.0)).unwrap();
        assert!((t - 1.0).abs() < 1e-7, "τ* = {t}");
    }

    #[test]
    fn crossing_of_transversal_pair() {
        // (b − √D)/(2a) with a=1, b=2, c=0.75, D=1
        let t = smallest_crossing(&quadratic_pair(1.0, 2.0, 0.75)).unwrap();
        assert!((t - 0.5).abs() < 1e-14, "τ* = {t}");
    }

    #[test]
    fn no_crossing_is_reported() {
        let p = MajorantPair::with_horizon(
            ScalarFn::linear(1.0, 0.0),
            ScalarFn::polynomial(vec![2.0, 0.0, 1.0]),
            0.0,
            Radius::Unbounded,
            10.0,
        )
        .unwrap();
        assert!(matches!(smallest_crossing(&p), Err(MajorantError::NoCrossing { .. })));
    }

    #[test]
    fn crossing_on_finite_interval() {
        let p = MajorantPair::new(ScalarFn::linear(1.0, 0.0), ScalarFn::linear(0.5, 0.5), 0.0, Radius::Finite(3.0))
            .unwrap();
        assert!((smallest_crossing(&p).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_start_is_its_own_crossing() {
        assert_eq!(smallest_crossing(&quadratic_pair(1.0, 2.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn next_tau_examples() {
        let p = quadratic_pair(1.0, 2.0, 1.0);
        let star = smallest_crossing(&p).unwrap();
        assert!((next_tau(&p, 0.0, star).unwrap() - 0.5).abs() < 1e-15);
        assert!((next_tau(&p, 0.5, star).unwrap() - 0.625).abs() < 1e-15);
        let lin = affine_pair();
        assert!((next_tau(&lin, 0.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn next_tau_past_crossing_fails() {
        let p = quadratic_pair(1.0, 2.0, 0.75);
        // τ = 1 lies between the two crossings, where ψ > φ
        assert!(matches!(next_tau(&p, 1.0, 1.5), Err(MajorantError::BracketFailure { .. })));
    }

    #[test]
    fn tau_sequence_geometric_tail() {
        let p = quadratic_pair(1.0, 2.0, 0.75);
        let seq = tau_sequence(&p, 100, 1e-10).unwrap();
        assert!(seq.converged);
        // oracle: τ_{j+1} = (τ_j² + 0.75)/2, error ratio → φ′(τ*)/ψ′ = 0.5
        let mut t = 0.0_f64;
        for (j, tau) in seq.taus.iter().enumerate() {
            assert!((tau - t).abs() < 1e-14, "j = {j}");
            t = (t * t + 0.75) / 2.0;
        }
        let e: Vec<f64> = seq.taus.iter().map(|t| seq.tau_star - t).collect();
        let ratio = e[30] / e[29];
        assert!((ratio - 0.5).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn tau_sequence_sublinear_tail() {
        let p = quadratic_pair(1.0, 2.0, 1.0);
        let seq = tau_sequence(&p, 1000, 1e-3).unwrap();
        // oracle: e_{j+1} = e_j − e_j²/2 with e_0 = 1
        let mut e = 1.0_f64;
        for (j, tau) in seq.taus.iter().enumerate() {
            assert!(((1.0 - tau) - e).abs() < 1e-12, "j = {j}");
            e -= e * e / 2.0;
        }
        let j = seq.taus.len() - 1;
        let scaled = j as f64 * (1.0 - seq.taus[j]);
        assert!((1.5..=2.5).contains(&scaled), "j·e_j = {scaled}");
    }

    #[test]
    fn tau_sequence_linear_closed_form() {
        let seq = tau_sequence(&affine_pair(), 100, 1e-12).unwrap();
        assert!(seq.converged);
        assert!((seq.tau_star - 1.0).abs() < 1e-15);
        for (j, tau) in seq.taus.iter().enumerate() {
            assert!((tau - (1.0 - 0.5f64.powi(j as i32))).abs() < 1e-15);
        }
    }

    #[test]
    fn h2_start_examples() {
        let p = quadratic_pair(1.0, 2.0, 1.0);
        assert!(validate_h2_start(&p, 1.0));
        assert!(!validate_h2_start(&p, 1.1));
        assert!(validate_h2_start(&affine_pair(), 0.0));
    }

    #[test]
    fn pair_validation_rejects_bad_input() {
        let flat = ScalarFn::with_derivative("flat", |_| 1.0, |_| 0.0);
        assert!(matches!(
            MajorantPair::new(ScalarFn::linear(1.0, 0.0), flat, 0.0, Radius::Unbounded),
            Err(MajorantError::NotIncreasing { which: "φ", .. })
        ));
        let no_derivative = ScalarFn::new("τ+1", |t| t + 1.0);
        assert_eq!(
            MajorantPair::new(ScalarFn::linear(1.0, 0.0), no_derivative, 0.0, Radius::Unbounded).unwrap_err(),
            MajorantError::MissingDerivative
        );
        assert!(matches!(
            MajorantPair::new(ScalarFn::linear(1.0, 1.0), ScalarFn::linear(0.5, 0.0), 0.0, Radius::Unbounded),
            Err(MajorantError::StartBelowCovering { .. })
        ));
    }

    #[test]
    fn polynomial_and_derivative() {
        let f = ScalarFn::polynomial(vec![0.75, 0.0, 1.0]);
        assert_eq!(f.eval(2.0), 4.75);
        assert_eq!(f.derivative(2.0), Some(4.0));
    }
}
