//! Rate functions, finite-`n` outage bounds and asymptotic decay rates.
//!
//! Every quantity reduces to a supremum of the concave function
//! `θ ↦ θ·x - c·Λ(θ)` over an interval of positive `θ`, computed by
//! [`legendre_sup`].

mod fcfs;
mod legendre;
mod single_packet;

pub use fcfs::{
    fcfs_lower_bound, fcfs_rate, fcfs_series, fcfs_term, fcfs_upper_bound_series, FcfsSeries,
    DEFAULT_R_MAX, EARLY_STOP_AFTER,
};
pub use legendre::{constraint_root, legendre_sup, ROOT_TOLERANCE, THETA_TOLERANCE};
pub use single_packet::{
    rates_coincide_check, sp_asymptotic_rate, sp_upper_bound, sp_upper_rate, CoincidenceReport,
    COINCIDENCE_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("coefficient must be positive and finite, got {0}")]
    NonPositiveCoefficient(f64),
    #[error("unstable system: mean transmission time {mean} is not below b = {b}")]
    Unstable { mean: f64, b: f64 },
    #[error("invalid query: {0}")]
    InvalidQuery(&'static str),
}

/// Feasible set of a supremum over `θ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    /// Only the MGF domain restricts `θ`.
    None,
    /// Additionally require `Λ(θ) - θ·b < 0`.
    LambdaBelowThetaB(f64),
}

/// Value of a supremum together with where it is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateResult {
    /// Nonnegative; `+∞` when the objective is unbounded.
    pub value: f64,
    /// Maximizer, `None` when the supremum is approached as `θ → 0⁺` or
    /// `θ → ∞` rather than attained.
    pub theta_star: Option<f64>,
    /// Whether the feasible set is nonempty.
    pub feasible: bool,
    /// Minimizing lookback index for rates minimized over `r`.
    pub r_star: Option<u32>,
}

impl RateResult {
    pub(crate) fn zero() -> Self {
        Self { value: 0.0, theta_star: None, feasible: true, r_star: None }
    }

    pub(crate) fn infinite() -> Self {
        Self { value: f64::INFINITY, theta_star: None, feasible: true, r_star: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    FcfsUpperSeries,
    FcfsLower,
    SpUpper,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::FcfsUpperSeries => "fcfs-upper-series",
            BoundKind::FcfsLower => "fcfs-lower",
            BoundKind::SpUpper => "sp-upper",
        }
    }
}

/// A probability bound in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    /// Natural log of the bound, clamped to `≤ 0`; `-∞` for a zero bound.
    pub log_value: f64,
    pub n: usize,
    pub kind: BoundKind,
    /// Slack of the lower bound, zero for upper bounds.
    pub epsilon: f64,
}

impl BoundValue {
    pub(crate) fn new(log_value: f64, n: usize, kind: BoundKind, epsilon: f64) -> Self {
        Self { log_value: log_value.min(0.0), n, kind, epsilon }
    }

    pub fn probability(&self) -> f64 {
        libm::exp(self.log_value)
    }
}

/// `ln Σ exp(vᵢ)`, tolerating `-∞` entries.
pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let peak = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if peak.is_infinite() {
        return peak;
    }
    peak + libm::log(values.map(|v| libm::exp(v - peak)).sum::<f64>())
}

pub(crate) fn check_query(x: f64, b: f64, alpha: f64) -> Result<(), BoundsError> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(BoundsError::InvalidQuery("x must be positive and finite"));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(BoundsError::InvalidQuery("b must be positive and finite"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(BoundsError::InvalidQuery("alpha must lie in (0, 1]"));
    }
    Ok(())
}
