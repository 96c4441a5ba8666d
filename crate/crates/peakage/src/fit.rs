//! Empirical decay-rate estimates from sweep rows.

use peakage_core::estimate::fit_line;
use peakage_core::LineFit;

use crate::sweep::SweepRow;

/// Outage events a row needs before it enters a slope fit.
pub const MIN_EVENTS: u64 = 10;
/// Rows used by a fit: the ones with the largest `n`.
pub const FIT_POINTS: usize = 5;
pub const MIN_FIT_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("only {usable} rows have at least {MIN_EVENTS} outage events; a fit needs {MIN_FIT_POINTS}")]
    TooFewRows { usable: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub line: LineFit,
    /// The `n` values that entered the fit, increasing.
    pub n_used: Vec<usize>,
}

/// Least-squares fit of `ln p̂` against `n` over the (up to
/// [`FIT_POINTS`]) largest `n` with at least [`MIN_EVENTS`] events, i.e.
/// `p̂ ≥ 10 / samples`. Pass rows of a single discipline.
pub fn fit_decay_slope(rows: &[SweepRow]) -> Result<DecayFit, FitError> {
    let mut usable: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| r.estimate.events >= MIN_EVENTS && r.estimate.p_hat > 0.0)
        .collect();
    if usable.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewRows { usable: usable.len() });
    }
    usable.sort_by_key(|r| r.n);
    let tail = &usable[usable.len().saturating_sub(FIT_POINTS)..];
    let points: Vec<(f64, f64)> = tail.iter().map(|r| (r.n as f64, r.estimate.log_p_hat())).collect();
    let line = fit_line(&points).map_err(|_| FitError::TooFewRows { usable: points.len() })?;
    Ok(DecayFit { line, n_used: tail.iter().map(|r| r.n).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use peakage_core::{Discipline, OutageEstimate};

    fn row(n: usize, p_hat: f64, samples: u64) -> SweepRow {
        let events = (p_hat * samples as f64).round() as u64;
        SweepRow {
            n,
            discipline: Discipline::Fcfs,
            source: Some(n),
            estimate: OutageEstimate {
                p_hat,
                ci_low: p_hat,
                ci_high: p_hat,
                half_width: 0.0,
                samples,
                events,
                batches: 20,
            },
            rate: None,
            r_star: None,
            upper_log: None,
            lower_log: None,
            digest: 0,
        }
    }

    #[test]
    fn exact_line() {
        let rows: Vec<SweepRow> = (1..=4).map(|n| row(n, (1.0 - 0.5 * n as f64).exp(), 1 << 40)).collect();
        let fit = fit_decay_slope(&rows).unwrap();
        assert!((fit.line.slope + 0.5).abs() < 1e-9);
        assert!((fit.line.intercept - 1.0).abs() < 1e-6);
    }

    #[test]
    fn uses_largest_usable_n() {
        let mut rows: Vec<SweepRow> = (1..=9).map(|n| row(n, (-(n as f64)).exp(), 1 << 40)).collect();
        rows.push(row(10, 1e-20, 1 << 40));
        let fit = fit_decay_slope(&rows).unwrap();
        assert_eq!(fit.n_used, vec![5, 6, 7, 8, 9]);
    }

    #[test]
    fn too_few_events() {
        let rows = vec![row(1, 0.5, 1000), row(2, 0.005, 1000), row(3, 0.0, 1000)];
        assert_eq!(fit_decay_slope(&rows), Err(FitError::TooFewRows { usable: 1 }));
    }
}
