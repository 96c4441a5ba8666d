//! Age-of-information sample paths rebuilt from delivered updates.

use alloc::vec::Vec;

use super::{EngineError, PeakAgeRecord};

/// Age samples `(t, Δ(t))` of one source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePath {
    pub source: usize,
    pub samples: Vec<(f64, f64)>,
}

/// Per-source age functions evaluated on a common time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeSamplePath {
    /// One entry per source present in the records, in increasing source order.
    pub sources: Vec<SourcePath>,
}

impl AgeSamplePath {
    pub fn source(&self, source: usize) -> Option<&SourcePath> {
        self.sources.iter().find(|p| p.source == source)
    }
}

/// Evaluates `Δᵢ(t) = t - Uᵢ(t)` on `grid`, where `Uᵢ(t)` is the generation
/// time of the latest update of source `i` that departed by `t` (inclusive),
/// and `0` before the first departure.
///
/// Records of each source must be in departure order, as every engine emits
/// them.
pub fn reconstruct_age_process(
    records: &[PeakAgeRecord],
    grid: &[f64],
) -> Result<AgeSamplePath, EngineError> {
    if records.is_empty() {
        return Err(EngineError::EmptyRecords);
    }
    let mut ids: Vec<usize> = records.iter().map(|r| r.source).collect();
    ids.sort_unstable();
    ids.dedup();

    let sources = ids
        .into_iter()
        .map(|source| {
            let updates: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.source == source)
                .map(|r| (r.departure, r.generation))
                .collect();
            let samples = grid
                .iter()
                .map(|&t| {
                    let delivered = updates.partition_point(|&(d, _)| d <= t);
                    let latest = if delivered == 0 { 0.0 } else { updates[delivered - 1].1 };
                    (t, t - latest)
                })
                .collect();
            SourcePath { source, samples }
        })
        .collect();
    Ok(AgeSamplePath { sources })
}
