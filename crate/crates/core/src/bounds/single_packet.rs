//! Single-packet bounds and the comparison with FCFS.

use crate::distributions::TransmissionModel;

use super::fcfs::{fcfs_rate, DEFAULT_R_MAX};
use super::legendre::legendre_sup;
use super::{BoundKind, BoundValue, BoundsError, Constraint, RateResult};

/// Tolerance under which the two disciplines' rates count as equal.
pub const COINCIDENCE_TOLERANCE: f64 = 1e-9;

/// Finite-`n` exponent `sup_{θ>0} [θ(x-b) - ((n+1)/n)·Λ(θ)]`.
pub fn sp_upper_rate(n: usize, x: f64, b: f64, model: &TransmissionModel) -> Result<RateResult, BoundsError> {
    if n == 0 {
        return Err(BoundsError::InvalidQuery("n must be at least 1"));
    }
    let coeff = (n as f64 + 1.0) / n as f64;
    legendre_sup(x - b, coeff, model, Constraint::None)
}

/// Upper bound on the single-packet outage probability, valid at every `n`:
/// `exp(-n · sp_upper_rate)`. Equals 1 for `x ≤ b`.
pub fn sp_upper_bound(n: usize, x: f64, b: f64, model: &TransmissionModel) -> Result<BoundValue, BoundsError> {
    let rate = sp_upper_rate(n, x, b, model)?;
    Ok(BoundValue::new(-(n as f64) * rate.value, n, BoundKind::SpUpper, 0.0))
}

/// Large-`n` limit of the single-packet exponent, `sup_{θ>0} [θ(x-b) - Λ(θ)]`.
pub fn sp_asymptotic_rate(x: f64, b: f64, model: &TransmissionModel) -> Result<RateResult, BoundsError> {
    legendre_sup(x - b, 1.0, model, Constraint::None)
}

/// FCFS and single-packet decay rates side by side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceReport {
    pub fcfs: RateResult,
    pub single_packet: RateResult,
    pub r_star: Option<u32>,
    /// Rates agree within [`COINCIDENCE_TOLERANCE`].
    pub equal: bool,
}

/// Compares the FCFS rate of source `α·n` with the single-packet rate.
///
/// The two coincide when the FCFS minimizer is `r = 1` and `α = 1`; for
/// other sources the FCFS `r = 1` coefficient `2 - α` differs from 1.
pub fn rates_coincide_check(
    x: f64,
    b: f64,
    alpha: f64,
    model: &TransmissionModel,
) -> Result<CoincidenceReport, BoundsError> {
    let fcfs = fcfs_rate(x, b, alpha, model, DEFAULT_R_MAX)?;
    let single_packet = sp_asymptotic_rate(x, b, model)?;
    let equal = fcfs.value == single_packet.value
        || (fcfs.value - single_packet.value).abs() <= COINCIDENCE_TOLERANCE;
    Ok(CoincidenceReport { fcfs, single_packet, r_star: fcfs.r_star, equal })
}
