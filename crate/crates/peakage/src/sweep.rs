//! Sweeps over the number of sources: simulation, outage estimation and the
//! matching analytical bounds.

use peakage_core::bounds::{
    fcfs_lower_bound, fcfs_rate, fcfs_upper_bound_series, sp_asymptotic_rate, sp_upper_bound,
    sp_upper_rate, DEFAULT_R_MAX,
};
use peakage_core::engine::{DigestRounds, EngineKind};
use peakage_core::seed::{derive_seed, splitmix64};
use peakage_core::{
    BoundKind, BoundsError, Discipline, EngineError, EstimateError, OutageCounter, OutageEstimate,
    PeakAgeRecord, SampledRounds, SystemConfig,
};
use rayon::prelude::*;

use crate::spec::ExperimentSpec;

/// Slack of the large-`n` FCFS lower bound.
pub const LOWER_BOUND_EPSILON: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Empirical outage probability of one discipline at one `n`, pooled over
/// replications, next to its analytical bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub discipline: Discipline,
    /// Studied source; `None` when every source's updates were pooled.
    pub source: Option<usize>,
    pub estimate: OutageEstimate,
    /// Asymptotic decay rate: the FCFS rate of this source, or the
    /// single-packet rate.
    pub rate: Option<f64>,
    pub r_star: Option<u32>,
    /// Log of the finite-`n` upper bound for this discipline.
    pub upper_log: Option<f64>,
    /// Log of the large-`n` FCFS lower bound.
    pub lower_log: Option<f64>,
    /// Fingerprint of every service time the replications consumed.
    pub digest: u64,
}

/// One bound evaluation, as written to the bounds CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub n: usize,
    pub kind: BoundKind,
    pub discipline: Discipline,
    pub x: f64,
    pub b: f64,
    pub alpha: f64,
    pub rate: f64,
    pub r_star: Option<u32>,
    pub theta_star: Option<f64>,
    pub log_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    /// Ordered by `n`, then by discipline in spec order.
    pub rows: Vec<SweepRow>,
    /// Ordered by `n`, then by kind.
    pub bounds: Vec<BoundRow>,
    pub warnings: Vec<String>,
}

struct RepResult {
    counter: OutageCounter,
    digest: u64,
}

/// Seed of replication `rep` at `n` sources; both disciplines use it, so
/// they see the same service times.
pub fn replication_seed(master: u64, n: usize, rep: u32) -> u64 {
    derive_seed(master, &[n as u64, u64::from(rep)])
}

fn system(spec: &ExperimentSpec, n: usize, discipline: Discipline, seed: u64) -> SystemConfig {
    SystemConfig {
        sources: n,
        b: spec.b,
        discipline,
        rounds: spec.rounds,
        burn_in: spec.burn_in,
        seed,
    }
}

fn run_replication(
    spec: &ExperimentSpec,
    n: usize,
    discipline: Discipline,
    rep: u32,
) -> Result<RepResult, HarnessError> {
    let seed = replication_seed(spec.seed, n, rep);
    let config = system(spec, n, discipline, seed);
    let source = spec.source_for(n);
    let per_rep = spec.samples_per_rep() * if source.is_some() { 1 } else { n as u64 };
    let mut counter = OutageCounter::new(n as f64 * spec.x, per_rep, spec.batches)?;
    let mut stream = DigestRounds::new(SampledRounds::new(spec.model.clone(), n, seed));
    EngineKind::for_discipline(discipline).run(&config, &mut stream, |r: &PeakAgeRecord| {
        if r.k > spec.burn_in && source.map_or(true, |i| r.source == i) {
            counter.push(r.peak_age);
        }
    })?;
    Ok(RepResult { counter, digest: stream.digest() })
}

/// Streams every record of replication 1 at `spec.n_list[0]` for the first
/// discipline into `sink`.
pub fn replay_records<F>(spec: &ExperimentSpec, sink: F) -> Result<(), HarnessError>
where
    F: FnMut(&PeakAgeRecord),
{
    let n = spec.n_list[0];
    let discipline = spec.disciplines[0];
    let seed = replication_seed(spec.seed, n, 1);
    let config = system(spec, n, discipline, seed);
    let stream = SampledRounds::new(spec.model.clone(), n, seed);
    EngineKind::for_discipline(discipline).run(&config, stream, sink)?;
    Ok(())
}

struct PointBounds {
    fcfs: Option<(f64, Option<u32>, f64, Option<f64>)>,
    sp: (f64, f64),
    rows: Vec<BoundRow>,
}

fn bounds_at(spec: &ExperimentSpec, n: usize) -> Result<PointBounds, HarnessError> {
    // Pooled FCFS estimates average over sources whose peak ages grow with
    // the index, so the last source's upper bound covers them.
    let source = spec.source_for(n);
    let alpha = source.unwrap_or(n) as f64 / n as f64;
    let (x, b, model) = (spec.x, spec.b, &spec.model);
    let mut rows = Vec::new();

    let fcfs = if model.mean() < b {
        let rate = fcfs_rate(x, b, alpha, model, DEFAULT_R_MAX)?;
        let upper = fcfs_upper_bound_series(n, x, b, alpha, model, DEFAULT_R_MAX)?;
        let r_star = rate.r_star.unwrap_or(1);
        let lower = match source {
            Some(_) => Some(fcfs_lower_bound(n, x, b, alpha, model, r_star, LOWER_BOUND_EPSILON)?),
            None => None,
        };
        for bound in std::iter::once(upper).chain(lower) {
            rows.push(BoundRow {
                n,
                kind: bound.kind,
                discipline: Discipline::Fcfs,
                x,
                b,
                alpha,
                rate: rate.value,
                r_star: rate.r_star,
                theta_star: rate.theta_star,
                log_bound: bound.log_value,
            });
        }
        Some((rate.value, rate.r_star, upper.log_value, lower.map(|l| l.log_value)))
    } else {
        None
    };

    let finite = sp_upper_rate(n, x, b, model)?;
    let upper = sp_upper_bound(n, x, b, model)?;
    rows.push(BoundRow {
        n,
        kind: BoundKind::SpUpper,
        discipline: Discipline::SinglePacket,
        x,
        b,
        alpha,
        rate: finite.value,
        r_star: None,
        theta_star: finite.theta_star,
        log_bound: upper.log_value,
    });
    let asymptotic = sp_asymptotic_rate(x, b, model)?;
    Ok(PointBounds { fcfs, sp: (asymptotic.value, upper.log_value), rows })
}

/// Runs every `(n, discipline, replication)` task in parallel and assembles
/// rows in a fixed order, so the output depends only on the spec.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutput, HarnessError> {
    let mut warnings = Vec::new();
    let mean = spec.model.mean();
    if mean >= spec.b && spec.disciplines.contains(&Discipline::Fcfs) {
        warnings.push(format!(
            "mean transmission time {mean} is not below b = {}: the FCFS queues are unstable and FCFS bounds are skipped",
            spec.b
        ));
    }

    let tasks: Vec<(usize, Discipline, u32)> = spec
        .n_list
        .iter()
        .flat_map(|&n| {
            spec.disciplines
                .iter()
                .flat_map(move |&d| (1..=spec.reps).map(move |rep| (n, d, rep)))
        })
        .collect();
    let results: Vec<RepResult> = tasks
        .par_iter()
        .map(|&(n, d, rep)| run_replication(spec, n, d, rep))
        .collect::<Result<_, _>>()?;

    let point_bounds: Vec<Option<PointBounds>> = if spec.bounds {
        spec.n_list
            .par_iter()
            .map(|&n| bounds_at(spec, n).map(Some))
            .collect::<Result<_, _>>()?
    } else {
        spec.n_list.iter().map(|_| None).collect()
    };

    let mut rows = Vec::new();
    let mut chunks = results.chunks(spec.reps as usize);
    for (&n, pb) in spec.n_list.iter().zip(&point_bounds) {
        for &discipline in &spec.disciplines {
            let reps = chunks.next().expect("one chunk per (n, discipline)");
            let mut counter = reps[0].counter.clone();
            let mut digest = splitmix64(reps[0].digest);
            for rep in &reps[1..] {
                counter.merge(&rep.counter);
                digest = splitmix64(digest ^ rep.digest);
            }
            let (rate, r_star, upper_log, lower_log) = match (discipline, pb) {
                (Discipline::Fcfs, Some(PointBounds { fcfs: Some((rate, r_star, up, low)), .. })) => {
                    (Some(*rate), *r_star, Some(*up), *low)
                }
                (Discipline::SinglePacket, Some(PointBounds { sp: (rate, up), .. })) => {
                    (Some(*rate), None, Some(*up), None)
                }
                _ => (None, None, None, None),
            };
            rows.push(SweepRow {
                n,
                discipline,
                source: spec.source_for(n),
                estimate: counter.finish(),
                rate,
                r_star,
                upper_log,
                lower_log,
                digest,
            });
        }
    }
    let bounds = point_bounds.into_iter().flatten().flat_map(|pb| pb.rows).collect();
    Ok(SweepOutput { rows, bounds, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use peakage_core::TransmissionModel;

    fn small_spec(model: &str) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(model.parse::<TransmissionModel>().unwrap());
        spec.n_list = vec![2, 4];
        spec.rounds = 4_000;
        spec.burn_in = 100;
        spec
    }

    #[test]
    fn rows_are_ordered_and_complete() {
        let mut spec = small_spec("poisson:3");
        spec.reps = 3;
        let out = run_sweep(&spec).unwrap();
        let keys: Vec<_> = out.rows.iter().map(|r| (r.n, r.discipline)).collect();
        assert_eq!(
            keys,
            vec![
                (2, Discipline::Fcfs),
                (2, Discipline::SinglePacket),
                (4, Discipline::Fcfs),
                (4, Discipline::SinglePacket)
            ]
        );
        for row in &out.rows {
            assert_eq!(row.estimate.samples, 3 * 3_900);
            assert_eq!(row.estimate.batches, 3 * spec.batches);
            assert!(row.estimate.ci_low <= row.estimate.p_hat && row.estimate.p_hat <= row.estimate.ci_high);
        }
        assert_eq!(out.bounds.len(), 6);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn disciplines_share_service_times() {
        let out = run_sweep(&small_spec("poisson:3")).unwrap();
        for pair in out.rows.chunks(2) {
            assert_eq!(pair[0].digest, pair[1].digest);
        }
        assert_ne!(out.rows[0].digest, out.rows[2].digest);
    }

    #[test]
    fn deterministic_service_never_exceeds() {
        let out = run_sweep(&small_spec("det:1")).unwrap();
        for row in &out.rows {
            assert_eq!(row.estimate.p_hat, 0.0);
            assert_eq!(row.upper_log, Some(f64::NEG_INFINITY));
        }
    }

    #[test]
    fn unstable_model_warns_and_skips_fcfs_bounds() {
        let out = run_sweep(&small_spec("poisson:6")).unwrap();
        assert_eq!(out.warnings.len(), 1);
        let fcfs = out.rows.iter().find(|r| r.discipline == Discipline::Fcfs).unwrap();
        assert_eq!(fcfs.upper_log, None);
        assert!(out.bounds.iter().all(|b| b.kind == BoundKind::SpUpper));
    }

    #[test]
    fn bounds_off_leaves_columns_empty() {
        let mut spec = small_spec("poisson:3");
        spec.bounds = false;
        let out = run_sweep(&spec).unwrap();
        assert!(out.bounds.is_empty());
        assert!(out.rows.iter().all(|r| r.rate.is_none() && r.upper_log.is_none()));
    }

    #[test]
    fn pooled_sources_count_every_update() {
        let mut spec = small_spec("poisson:3");
        spec.source = crate::SourceChoice::All;
        let out = run_sweep(&spec).unwrap();
        for row in &out.rows {
            assert_eq!(row.source, None);
            assert_eq!(row.estimate.samples, row.n as u64 * 3_900);
            assert_eq!(row.lower_log, None);
        }
        assert!(out.bounds.iter().all(|b| b.kind != BoundKind::FcfsLower && b.alpha == 1.0));
    }

    #[test]
    fn same_seed_same_rows() {
        let spec = small_spec("geom:0.5");
        assert_eq!(run_sweep(&spec).unwrap(), run_sweep(&spec).unwrap());
        let mut other = spec.clone();
        other.seed = 2;
        assert_ne!(run_sweep(&spec).unwrap().rows[0].digest, run_sweep(&other).unwrap().rows[0].digest);
    }
}
