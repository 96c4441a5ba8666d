use crate::distributions::TransmissionModel;

use super::{BoundsError, Constraint, RateResult};

/// Width in `θ` at which the ternary search stops.
pub const THETA_TOLERANCE: f64 = 1e-9;
/// Width in `θ` at which the constraint-boundary bisection stops.
pub const ROOT_TOLERANCE: f64 = 1e-12;

/// Largest `θ` treated as inside a finite MGF domain.
pub(crate) fn domain_inner(model: &TransmissionModel) -> f64 {
    let limit = model.mgf_domain().upper_limit;
    if limit.is_finite() {
        limit * (1.0 - 1e-12)
    } else {
        limit
    }
}

/// Right end of `{θ > 0 : Λ(θ) - θb < 0}` intersected with the MGF domain.
///
/// Returns the feasible side of the bisection bracket, so `Λ(θ) < θb` holds
/// at the returned value, or `+∞` when the set is unbounded. Requires
/// `mean < b`, which makes the set nonempty near zero; by convexity of `Λ` it
/// is then an interval.
pub fn constraint_root(model: &TransmissionModel, b: f64) -> f64 {
    debug_assert!(model.mean() < b);
    if let Some((vmax, _)) = model.upper_atom() {
        // Λ(θ) ≤ θ·vmax ≤ θ·b with equality only for a point mass.
        if vmax <= b {
            return f64::INFINITY;
        }
    }
    let gap = |theta: f64| model.log_mgf_unchecked(theta) - theta * b;
    let cap = domain_inner(model);
    let mut lo = 0.0;
    let mut hi = cap.min(1.0);
    loop {
        if gap(hi) >= 0.0 {
            break;
        }
        if hi >= cap {
            return cap;
        }
        lo = hi;
        hi = (2.0 * hi).min(cap);
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        if hi - lo <= ROOT_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `sup { θ·x_arg - coeff·Λ(θ) : θ > 0, θ feasible }`.
///
/// The objective is concave and vanishes at `θ = 0`, so the supremum is `0`
/// whenever `x_arg ≤ coeff·E[V]`. Otherwise the maximizer is bracketed (by
/// doubling when the feasible set is unbounded) and located by ternary search
/// to [`THETA_TOLERANCE`]. Unbounded objectives, which occur for
/// bounded-support models with `x_arg > coeff·max V`, give `+∞`.
///
/// An empty feasible set (`E[V] ≥ b` under the constraint) is reported as
/// `feasible = false` with value `0`.
pub fn legendre_sup(
    x_arg: f64,
    coeff: f64,
    model: &TransmissionModel,
    constraint: Constraint,
) -> Result<RateResult, BoundsError> {
    if !(coeff > 0.0 && coeff.is_finite()) {
        return Err(BoundsError::NonPositiveCoefficient(coeff));
    }
    if x_arg.is_nan() {
        return Err(BoundsError::InvalidQuery("rate argument is NaN"));
    }
    let mean = model.mean();
    let mut upper = match constraint {
        Constraint::None => domain_inner(model),
        Constraint::LambdaBelowThetaB(b) => {
            if !(mean < b) {
                return Ok(RateResult { feasible: false, ..RateResult::zero() });
            }
            constraint_root(model, b).min(domain_inner(model))
        }
    };
    if x_arg <= coeff * mean {
        return Ok(RateResult::zero());
    }
    if x_arg == f64::INFINITY {
        return Ok(RateResult::infinite());
    }

    let objective = |theta: f64| theta * x_arg - coeff * model.log_mgf_unchecked(theta);

    if upper.is_infinite() {
        if let Some((vmax, mass)) = model.upper_atom() {
            let slope = x_arg - coeff * vmax;
            if slope > 0.0 {
                return Ok(RateResult::infinite());
            }
            if slope == 0.0 {
                // Approached as θ → ∞: θ·vmax·c - c·(θ·vmax + ln P(V = vmax)).
                return Ok(RateResult { value: -coeff * libm::log(mass), ..RateResult::zero() });
            }
        }
        let mut h = 1.0;
        loop {
            if objective(2.0 * h) <= objective(h) {
                upper = 2.0 * h;
                break;
            }
            h *= 2.0;
            if h > 1e300 {
                return Ok(RateResult::infinite());
            }
        }
    }

    let (mut lo, mut hi) = (0.0, upper);
    while hi - lo > THETA_TOLERANCE {
        let third = (hi - lo) / 3.0;
        let (m1, m2) = (lo + third, hi - third);
        if objective(m1) < objective(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let mid = 0.5 * (lo + hi);
    let (theta, value) = [mid, hi]
        .into_iter()
        .map(|t| (t, objective(t)))
        .fold((mid, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best });
    if !(value > 0.0) {
        return Ok(RateResult::zero());
    }
    Ok(RateResult { value, theta_star: Some(theta), feasible: true, r_star: None })
}
