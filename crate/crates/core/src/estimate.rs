//! Outage-probability estimation and log-linear fits.

use alloc::vec;
use alloc::vec::Vec;

use crate::engine::PeakAgeRecord;

/// Two-sided 95% standard-normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimateError {
    #[error("{records} records cannot fill {batches} batches")]
    TooFewRecords { records: usize, batches: usize },
    #[error("at least one batch is required")]
    NoBatches,
    #[error("a line fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
}

/// Empirical outage probability with a batch-means confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEstimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Half-width of the 95% interval before clamping to `[0, 1]`.
    pub half_width: f64,
    pub samples: u64,
    pub events: u64,
    pub batches: usize,
}

impl OutageEstimate {
    /// `ln p̂`; `-∞` when no outage was observed.
    pub fn log_p_hat(&self) -> f64 {
        libm::log(self.p_hat)
    }
}

/// Streaming counter of threshold exceedances `A ≥ threshold`.
///
/// Samples are grouped into contiguous batches of equal size; samples beyond
/// the last full batch count toward `p̂` but not toward the interval.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageCounter {
    threshold: f64,
    batch_size: u64,
    batch_events: Vec<u64>,
    batches_per_stream: usize,
    seen_in_stream: u64,
    samples: u64,
    events: u64,
}

impl OutageCounter {
    /// Counter for one stream of `expected_samples` values cut into `batches`.
    pub fn new(threshold: f64, expected_samples: u64, batches: usize) -> Result<Self, EstimateError> {
        if batches == 0 {
            return Err(EstimateError::NoBatches);
        }
        if expected_samples < batches as u64 {
            return Err(EstimateError::TooFewRecords { records: expected_samples as usize, batches });
        }
        Ok(Self {
            threshold,
            batch_size: expected_samples / batches as u64,
            batch_events: vec![0; batches],
            batches_per_stream: batches,
            seen_in_stream: 0,
            samples: 0,
            events: 0,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn push(&mut self, peak_age: f64) {
        let hit = peak_age >= self.threshold;
        let slot = self.seen_in_stream / self.batch_size;
        if (slot as usize) < self.batches_per_stream && hit {
            self.batch_events[slot as usize] += 1;
        }
        self.seen_in_stream += 1;
        self.samples += 1;
        self.events += u64::from(hit);
    }

    /// Appends the batches of another stream (e.g. a further replication)
    /// with the same threshold and batch size. Later pushes keep filling this
    /// counter's own stream.
    pub fn merge(&mut self, other: &OutageCounter) {
        assert_eq!(self.threshold, other.threshold, "merging counters with different thresholds");
        assert_eq!(self.batch_size, other.batch_size, "merging counters with different batch sizes");
        self.batch_events.extend_from_slice(&other.batch_events);
        self.samples += other.samples;
        self.events += other.events;
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn finish(&self) -> OutageEstimate {
        let p_hat = if self.samples == 0 { 0.0 } else { self.events as f64 / self.samples as f64 };
        let batches = self.batch_events.len();
        let fractions = self.batch_events.iter().map(|&e| e as f64 / self.batch_size as f64);
        let mean = fractions.clone().sum::<f64>() / batches as f64;
        let half_width = if batches > 1 {
            let var = fractions.map(|f| (f - mean) * (f - mean)).sum::<f64>() / (batches - 1) as f64;
            Z_95 * libm::sqrt(var / batches as f64)
        } else {
            0.0
        };
        OutageEstimate {
            p_hat,
            ci_low: (p_hat - half_width).max(0.0),
            ci_high: (p_hat + half_width).min(1.0),
            half_width,
            samples: self.samples,
            events: self.events,
            batches,
        }
    }
}

/// Fraction of `records` with `A ≥ n·x`, with a batch-means interval over
/// `batches` contiguous blocks. `records` should hold one source's
/// post-burn-in updates in order.
pub fn estimate_outage(
    records: &[PeakAgeRecord],
    x: f64,
    n: usize,
    batches: usize,
) -> Result<OutageEstimate, EstimateError> {
    if batches == 0 {
        return Err(EstimateError::NoBatches);
    }
    if records.len() < batches {
        return Err(EstimateError::TooFewRecords { records: records.len(), batches });
    }
    let mut counter = OutageCounter::new(n as f64 * x, records.len() as u64, batches)?;
    for r in records {
        counter.push(r.peak_age);
    }
    Ok(counter.finish())
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn fit_line(points: &[(f64, f64)]) -> Result<LineFit, EstimateError> {
    if points.len() < 2 {
        return Err(EstimateError::TooFewPoints { needed: 2, got: points.len() });
    }
    let len = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / len;
    let my = points.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points.iter().map(|p| { let e = p.1 - intercept - slope * p.0; e * e }).sum();
    Ok(LineFit { slope, intercept, residual: libm::sqrt(sse / len) })
}
