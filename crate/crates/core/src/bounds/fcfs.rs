//! FCFS decay rate and finite-`n` bounds.
//!
//! A peak age of source `i = α·n` that looks back `r` rounds exceeds `n·x`
//! with probability at most `exp(-n·term(r))`, where
//!
//! `term(r) = r · sup_θ [ θ·(x/r + (r-2)·b/r) - ((r+1-α)/r)·Λ(θ) ]`.
//!
//! The decay rate is `min_r term(r)`; the finite-`n` upper bound sums the
//! terms explicitly up to a cutoff and closes the remainder with a geometric
//! series that converges for `θ` with `Λ(θ) < θ·b`.

use alloc::vec::Vec;

use crate::distributions::TransmissionModel;

use super::legendre::{constraint_root, legendre_sup};
use super::{check_query, log_sum_exp, BoundKind, BoundValue, BoundsError, Constraint, RateResult};

/// Default largest lookback considered by [`fcfs_rate`].
pub const DEFAULT_R_MAX: u32 = 1000;
/// Consecutive non-improving terms after which the search over `r` stops.
pub const EARLY_STOP_AFTER: u32 = 10;
/// Points in the coarse grid used to place the tail parameter.
const TAIL_GRID: usize = 512;

fn check_stable(model: &TransmissionModel, b: f64) -> Result<(), BoundsError> {
    let mean = model.mean();
    if mean < b {
        Ok(())
    } else {
        Err(BoundsError::Unstable { mean, b })
    }
}

/// `term(r)` for lookback `r ≥ 1`; `theta_star` is the maximizer of the
/// inner supremum.
pub fn fcfs_term(
    r: u32,
    x: f64,
    b: f64,
    alpha: f64,
    model: &TransmissionModel,
) -> Result<RateResult, BoundsError> {
    if r == 0 {
        return Err(BoundsError::InvalidQuery("lookback r must be at least 1"));
    }
    let rf = f64::from(r);
    let x_arg = x / rf + (rf - 2.0) * b / rf;
    let coeff = (rf + 1.0 - alpha) / rf;
    let inner = legendre_sup(x_arg, coeff, model, Constraint::None)?;
    Ok(RateResult { value: rf * inner.value, r_star: Some(r), ..inner })
}

/// Asymptotic FCFS decay rate `min_{1≤r≤r_max} term(r)`.
///
/// Once some term is finite, the scan stops early after [`EARLY_STOP_AFTER`]
/// consecutive terms fail to improve on the running minimum. Requires a
/// stable queue, `E[V] < b`.
pub fn fcfs_rate(
    x: f64,
    b: f64,
    alpha: f64,
    model: &TransmissionModel,
    r_max: u32,
) -> Result<RateResult, BoundsError> {
    check_query(x, b, alpha)?;
    check_stable(model, b)?;
    if r_max == 0 {
        return Err(BoundsError::InvalidQuery("r_max must be at least 1"));
    }
    let mut best = fcfs_term(1, x, b, alpha, model)?;
    let mut stale = 0;
    for r in 2..=r_max {
        let term = fcfs_term(r, x, b, alpha, model)?;
        if term.value < best.value {
            best = term;
            stale = 0;
        } else if best.value.is_finite() {
            stale += 1;
            if stale >= EARLY_STOP_AFTER {
                break;
            }
        }
    }
    Ok(best)
}

/// Pieces of the finite-`n` FCFS union bound, all in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct FcfsSeries {
    /// `-n·term(r)` for `r = 1..=cutoff`.
    pub log_terms: Vec<f64>,
    /// Log of the geometric bound on `Σ_{r>cutoff} exp(-n·term(r))`.
    pub log_tail: f64,
    /// Parameter at which the tail bound was evaluated.
    pub tail_theta: Option<f64>,
    /// Minimizer of the decay rate.
    pub rate: RateResult,
}

impl FcfsSeries {
    pub fn cutoff(&self) -> u32 {
        self.log_terms.len() as u32
    }

    pub fn log_total(&self) -> f64 {
        log_sum_exp(self.log_terms.iter().copied().chain(core::iter::once(self.log_tail)))
    }
}

/// Log of the tail `Σ_{r≥first} exp(-n·r·g - n·h)` with `g = θb - Λ(θ) > 0`
/// and `h = θx - 2θb + (1-α)Λ(θ)`, which bounds the terms `r ≥ first`
/// termwise, minimized over feasible `θ`.
fn tail_bound(
    n: f64,
    first: u32,
    x: f64,
    b: f64,
    alpha: f64,
    model: &TransmissionModel,
) -> (f64, Option<f64>) {
    let first = f64::from(first);
    let log_tail = |theta: f64| {
        let lambda = model.log_mgf_unchecked(theta);
        let gap = theta * b - lambda;
        if !(gap > 0.0) {
            return f64::INFINITY;
        }
        let head = theta * x - 2.0 * theta * b + (1.0 - alpha) * lambda;
        -n * first * gap - n * head - libm::log(-libm::expm1(-n * gap))
    };

    let mut upper = constraint_root(model, b);
    if upper.is_infinite() {
        if let Some((vmax, _)) = model.upper_atom() {
            // Λ(θ) → θ·vmax + ln P(V = vmax); the exponent is linear in θ with
            // this slope, so a negative slope drives the tail to zero.
            let slope = -n * (first * (b - vmax) + x - 2.0 * b + (1.0 - alpha) * vmax);
            if slope < 0.0 {
                return (f64::NEG_INFINITY, None);
            }
        }
        let mut h = 1.0;
        while log_tail(2.0 * h) < log_tail(h) && h < 1e6 {
            h *= 2.0;
        }
        upper = 2.0 * h;
    }

    // The exponent need not be convex in θ: scan a grid, then refine the best
    // cell by golden-section search. Any feasible θ yields a valid bound.
    let step = upper / (TAIL_GRID + 1) as f64;
    let (best_idx, _) = (1..=TAIL_GRID)
        .map(|j| (j, log_tail(j as f64 * step)))
        .fold((1, f64::INFINITY), |acc, cand| if cand.1 < acc.1 { cand } else { acc });
    let (mut lo, mut hi) = ((best_idx - 1) as f64 * step, (best_idx + 1) as f64 * step);
    let ratio = 0.5 * (libm::sqrt(5.0) - 1.0);
    while hi - lo > 1e-12 * upper.max(1.0) {
        let m1 = hi - ratio * (hi - lo);
        let m2 = lo + ratio * (hi - lo);
        if log_tail(m1) < log_tail(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let candidates = [0.5 * (lo + hi), best_idx as f64 * step];
    let (theta, value) = candidates
        .into_iter()
        .map(|t| (t, log_tail(t)))
        .fold((0.0, f64::INFINITY), |acc, cand| if cand.1 < acc.1 { cand } else { acc });
    (value, Some(theta))
}

/// Evaluates the FCFS union-bound series at finite `n`: explicit terms up to
/// `R = max(r* + 10, 20)` plus a geometric tail bound from `R + 1` on.
pub fn fcfs_series(
    n: usize,
    x: f64,
    b: f64,
    alpha: f64,
    model: &TransmissionModel,
    r_max: u32,
) -> Result<FcfsSeries, BoundsError> {
    if n == 0 {
        return Err(BoundsError::InvalidQuery("n must be at least 1"));
    }
    let rate = fcfs_rate(x, b, alpha, model, r_max)?;
    let cutoff = (rate.r_star.unwrap_or(1) + 10).max(20);
    let nf = n as f64;
    let log_terms = (1..=cutoff)
        .map(|r| fcfs_term(r, x, b, alpha, model).map(|t| -nf * t.value))
        .collect::<Result<Vec<_>, _>>()?;
    let (log_tail, tail_theta) = tail_bound(nf, cutoff + 1, x, b, alpha, model);
    Ok(FcfsSeries { log_terms, log_tail, tail_theta, rate })
}

/// Finite-`n` upper bound on the FCFS outage probability of source
/// `i = α·n`, the log of the series in [`fcfs_series`] clamped to `≤ 0`.
pub fn fcfs_upper_bound_series(
    n: usize,
    x: f64,
    b: f64,
    alpha: f64,
    model: &TransmissionModel,
    r_max: u32,
) -> Result<BoundValue, BoundsError> {
    let series = fcfs_series(n, x, b, alpha, model, r_max)?;
    Ok(BoundValue::new(series.log_total(), n, BoundKind::FcfsUpperSeries, 0.0))
}

/// Large-`n` lower bound `-n·term(r) - ε` for a chosen lookback `r`.
///
/// Holds asymptotically (Cramér); it is not a guarantee at any fixed `n`.
pub fn fcfs_lower_bound(
    n: usize,
    x: f64,
    b: f64,
    alpha: f64,
    model: &TransmissionModel,
    r: u32,
    epsilon: f64,
) -> Result<BoundValue, BoundsError> {
    check_query(x, b, alpha)?;
    check_stable(model, b)?;
    if !(epsilon > 0.0) {
        return Err(BoundsError::InvalidQuery("epsilon must be positive"));
    }
    if n == 0 {
        return Err(BoundsError::InvalidQuery("n must be at least 1"));
    }
    let term = fcfs_term(r, x, b, alpha, model)?;
    Ok(BoundValue::new(-(n as f64) * term.value - epsilon, n, BoundKind::FcfsLower, epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;

    const RATE: f64 = 0.554_128_118_829_953_4; // 5 ln(5/3) - 2

    fn poisson3() -> TransmissionModel {
        TransmissionModel::poisson(3.0).unwrap()
    }

    #[test]
    fn fig4_rate_is_attained_at_r1() {
        let rate = fcfs_rate(10.0, 5.0, 1.0, &poisson3(), DEFAULT_R_MAX).unwrap();
        assert_eq!(rate.r_star, Some(1));
        assert!((rate.value - RATE).abs() < 1e-9);
        // term(r) = sup θ(5r) - rΛ(θ) = r·RATE at α = 1.
        for r in 1..=5 {
            let t = fcfs_term(r, 10.0, 5.0, 1.0, &poisson3()).unwrap();
            assert!((t.value - f64::from(r) * RATE).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_rate_when_threshold_is_the_mean() {
        let rate = fcfs_rate(8.0, 5.0, 1.0, &poisson3(), DEFAULT_R_MAX).unwrap();
        assert_eq!(rate.value, 0.0);
        assert_eq!(rate.r_star, Some(1));
    }

    #[test]
    fn deterministic_never_exceeds() {
        let d = TransmissionModel::deterministic(1.0).unwrap();
        let rate = fcfs_rate(10.0, 5.0, 1.0, &d, DEFAULT_R_MAX).unwrap();
        assert_eq!(rate.value, f64::INFINITY);
        let bound = fcfs_upper_bound_series(10, 10.0, 5.0, 1.0, &d, DEFAULT_R_MAX).unwrap();
        assert_eq!(bound.log_value, f64::NEG_INFINITY);
        assert_eq!(bound.probability(), 0.0);
    }

    #[test]
    fn unstable_queue_is_rejected() {
        let p = TransmissionModel::poisson(5.0).unwrap();
        assert!(matches!(
            fcfs_rate(10.0, 5.0, 1.0, &p, DEFAULT_R_MAX),
            Err(BoundsError::Unstable { .. })
        ));
        assert!(fcfs_upper_bound_series(4, 10.0, 5.0, 1.0, &p, DEFAULT_R_MAX).is_err());
        assert!(fcfs_lower_bound(4, 10.0, 5.0, 1.0, &p, 1, 0.01).is_err());
    }

    #[test]
    fn lower_bound_example() {
        let lb = fcfs_lower_bound(10, 10.0, 5.0, 1.0, &poisson3(), 1, 0.01).unwrap();
        assert!((lb.log_value - (-10.0 * RATE - 0.01)).abs() < 1e-8);
        assert_eq!(lb.kind, BoundKind::FcfsLower);
        assert!(fcfs_lower_bound(10, 10.0, 5.0, 1.0, &poisson3(), 1, 0.0).is_err());
        // r* gives the largest lower bound.
        let best = (1..=30)
            .map(|r| fcfs_lower_bound(10, 10.0, 5.0, 1.0, &poisson3(), r, 0.01).unwrap().log_value)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best, lb.log_value);
    }

    #[test]
    fn series_dominates_its_largest_term() {
        for n in [1, 4, 10, 40] {
            let series = fcfs_series(n, 10.0, 5.0, 1.0, &poisson3(), DEFAULT_R_MAX).unwrap();
            assert_eq!(series.cutoff(), 20);
            assert!(series.log_total() >= -(n as f64) * series.rate.value);
            let bound = fcfs_upper_bound_series(n, 10.0, 5.0, 1.0, &poisson3(), DEFAULT_R_MAX).unwrap();
            assert!(bound.log_value <= 0.0);
        }
    }

    #[test]
    fn series_rate_converges() {
        let n = 200;
        let bound = fcfs_upper_bound_series(n, 10.0, 5.0, 1.0, &poisson3(), DEFAULT_R_MAX).unwrap();
        assert!((bound.log_value / n as f64 + RATE).abs() < 1e-3, "{}", bound.log_value);
    }

    #[test]
    fn lookback_can_beat_r1() {
        // Heavy threshold with α = 1: the unconstrained r = 1 maximizer lies
        // beyond Λ(θ) = θb, and looking back two rounds is cheaper.
        let rate = fcfs_rate(20.0, 5.0, 1.0, &poisson3(), DEFAULT_R_MAX).unwrap();
        assert!(rate.r_star.unwrap() > 1, "{rate:?}");
        let t1 = fcfs_term(1, 20.0, 5.0, 1.0, &poisson3()).unwrap();
        assert!(rate.value < t1.value);
    }

    #[test]
    fn finite_terms_found_past_infinite_ones() {
        // Largest atom slightly above b: small lookbacks give infinite
        // terms, large ones finite.
        let m = TransmissionModel::discrete(alloc::vec![(0.2, 0.55), (2.1, 0.33), (3.8, 0.12)]).unwrap();
        let rate = fcfs_rate(13.0, 3.75, 0.5, &m, DEFAULT_R_MAX).unwrap();
        assert!(rate.value.is_finite());
        assert!(rate.r_star.unwrap() > EARLY_STOP_AFTER);
    }

    #[test]
    fn rejects_invalid_queries() {
        let p = poisson3();
        assert!(fcfs_rate(0.0, 5.0, 1.0, &p, 10).is_err());
        assert!(fcfs_rate(10.0, 5.0, 0.0, &p, 10).is_err());
        assert!(fcfs_rate(10.0, 5.0, 1.5, &p, 10).is_err());
        assert!(fcfs_rate(10.0, 5.0, 1.0, &p, 0).is_err());
        assert!(fcfs_term(0, 10.0, 5.0, 1.0, &p).is_err());
    }
}
