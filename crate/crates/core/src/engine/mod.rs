//! Simulation of the bulk-arrival round-robin update system.
//!
//! All `n` sources generate a packet simultaneously at times `m·n·b`,
//! `m = 1, 2, ...`. A single server visits the sources in the fixed cyclic
//! order `1, 2, ..., n` and idles until the next batch whenever the visited
//! queue is empty. The generation time `S(0) = 0` serves as the reference
//! for the first peak age of each source.
//!
//! Engines consume service times round by round from a [`ServiceSource`] and
//! hand every delivered update to a caller-supplied sink, so arbitrarily long
//! horizons run in constant memory. Sharing one seeded source between the
//! FCFS and single-packet engines gives common random numbers.

mod age;
mod fcfs;
mod single_packet;

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distributions::TransmissionModel;

pub use age::{reconstruct_age_process, AgeSamplePath, SourcePath};
pub use fcfs::{fcfs_peak_age_oracle, run_fcfs_event_driven, run_fcfs_recursive};
pub use single_packet::{lemma2_preemptions, lemma3_rhs, run_single_packet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid system configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("service source provides {actual} sources, configuration expects {expected}")]
    SourceMismatch { expected: usize, actual: usize },
    #[error("service source exhausted after {0} rounds")]
    Exhausted(u64),
    #[error("records are not consecutive updates of one source")]
    NonConsecutive,
    #[error("record references round {0}, outside the service matrix")]
    RoundOutOfRange(u64),
    #[error("no records to reconstruct an age process from")]
    EmptyRecords,
}

/// Queueing discipline at each per-source buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Discipline {
    /// Unbounded buffer, oldest packet served first.
    Fcfs,
    /// Buffer of one; a new arrival replaces the waiting packet.
    SinglePacket,
}

impl Discipline {
    /// Short name used on the command line and in CSV output.
    pub fn short_name(self) -> &'static str {
        match self {
            Discipline::Fcfs => "fcfs",
            Discipline::SinglePacket => "spq",
        }
    }
}

/// One simulated system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub sources: usize,
    /// Per-source inter-arrival parameter; batches arrive every `sources·b`.
    pub b: f64,
    pub discipline: Discipline,
    /// Number of rounds (updates per source) to simulate.
    pub rounds: u64,
    /// Leading rounds excluded from estimation.
    pub burn_in: u64,
    pub seed: u64,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.sources == 0 {
            return Err(EngineError::InvalidConfig("at least one source is required"));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(EngineError::InvalidConfig("b must be positive and finite"));
        }
        if self.rounds == 0 {
            return Err(EngineError::InvalidConfig("at least one round is required"));
        }
        if self.burn_in >= self.rounds {
            return Err(EngineError::InvalidConfig("burn-in must be shorter than the horizon"));
        }
        Ok(())
    }

    /// Batch period `n·b`.
    pub fn period(&self) -> f64 {
        self.sources as f64 * self.b
    }

    /// Arrival time of batch `m`.
    pub fn batch_time(&self, m: u64) -> f64 {
        m as f64 * self.period()
    }

    /// Index of the latest batch that has arrived by time `t`
    /// (an arrival at exactly `t` counts).
    pub(crate) fn latest_batch(&self, t: f64) -> u64 {
        let mut m = libm::floor(t / self.period()).max(0.0) as u64;
        while self.batch_time(m + 1) <= t {
            m += 1;
        }
        while m > 0 && self.batch_time(m) > t {
            m -= 1;
        }
        m
    }
}

/// One delivered update, the `k`-th of its source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakAgeRecord {
    /// Source index, 1-based.
    pub source: usize,
    /// Update index, 1-based; equals the service round.
    pub k: u64,
    /// Generation time of the previous delivered update, `S_i(k-1)`.
    pub prev_generation: f64,
    /// Generation (arrival) time of this update, `S_i(k)`.
    pub generation: f64,
    pub waiting: f64,
    pub service: f64,
    /// Server idle time between the previous departure of this source and
    /// the start of this service (single-packet only).
    pub idle: f64,
    /// Packets of this source discarded since the previous delivered update
    /// (single-packet only).
    pub preempted: u64,
    pub departure: f64,
    /// `D_i(k) - S_i(k-1)`.
    pub peak_age: f64,
    /// Batch index of `prev_generation`.
    pub prev_batch: u64,
    /// Batch index of `generation`.
    pub batch: u64,
}

/// Server accounting collected by the event-driven engines.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunStats {
    pub busy_time: f64,
    pub idle_time: f64,
    /// Idle periods that began while some queue still held a packet.
    /// Always zero for a work-conserving server.
    pub idle_with_backlog: u64,
    pub delivered: u64,
}

/// Supplies service times one round at a time, rounds in increasing order.
pub trait ServiceSource {
    fn sources(&self) -> usize;

    /// Writes the service times of the next round into `out`
    /// (`out.len() == self.sources()`). Returns `false` when exhausted.
    fn next_round(&mut self, out: &mut [f64]) -> bool;
}

impl<S: ServiceSource + ?Sized> ServiceSource for &mut S {
    fn sources(&self) -> usize {
        (**self).sources()
    }

    fn next_round(&mut self, out: &mut [f64]) -> bool {
        (**self).next_round(out)
    }
}

/// Service times drawn on demand from a seeded ChaCha8 stream.
///
/// Round `r` of a stream is identical to row `r` of the matrix produced by
/// [`generate_service_matrix`] with the same model, size and seed.
#[derive(Debug, Clone)]
pub struct SampledRounds {
    model: TransmissionModel,
    sources: usize,
    rng: ChaCha8Rng,
}

impl SampledRounds {
    pub fn new(model: TransmissionModel, sources: usize, seed: u64) -> Self {
        Self { model, sources, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl ServiceSource for SampledRounds {
    fn sources(&self) -> usize {
        self.sources
    }

    fn next_round(&mut self, out: &mut [f64]) -> bool {
        for v in out.iter_mut() {
            *v = self.model.sample(&mut self.rng);
        }
        true
    }
}

/// Wraps a source and fingerprints every service time it hands out
/// (FNV-1a over the IEEE-754 bit patterns).
#[derive(Debug, Clone)]
pub struct DigestRounds<S> {
    inner: S,
    digest: u64,
}

impl<S: ServiceSource> DigestRounds<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, digest: 0xCBF2_9CE4_8422_2325 }
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }
}

impl<S: ServiceSource> ServiceSource for DigestRounds<S> {
    fn sources(&self) -> usize {
        self.inner.sources()
    }

    fn next_round(&mut self, out: &mut [f64]) -> bool {
        if !self.inner.next_round(out) {
            return false;
        }
        for v in out.iter() {
            for byte in v.to_bits().to_le_bytes() {
                self.digest = (self.digest ^ u64::from(byte)).wrapping_mul(0x0000_0100_0000_01B3);
            }
        }
        true
    }
}

/// Pre-drawn service times `V[u][r]` for `u ∈ 1..=n`, `r ∈ 1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceMatrix {
    sources: usize,
    rounds: usize,
    // Round-major: entry (u, r) lives at (r-1)*sources + (u-1).
    values: Vec<f64>,
}

impl ServiceMatrix {
    /// Builds a matrix from per-round rows.
    ///
    /// # Panics
    /// If the rows are ragged or any entry is negative or non-finite.
    pub fn from_rounds(rows: &[Vec<f64>]) -> Self {
        let sources = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(sources * rows.len());
        for row in rows {
            assert_eq!(row.len(), sources, "ragged service matrix");
            assert!(row.iter().all(|v| *v >= 0.0 && v.is_finite()), "invalid service time");
            values.extend_from_slice(row);
        }
        Self { sources, rounds: rows.len(), values }
    }

    /// Every entry equal to `value`.
    pub fn constant(sources: usize, rounds: usize, value: f64) -> Self {
        assert!(value >= 0.0 && value.is_finite());
        Self { sources, rounds, values: alloc::vec![value; sources * rounds] }
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// `V_u(r)`, both indices 1-based.
    pub fn get(&self, source: usize, round: usize) -> f64 {
        assert!((1..=self.sources).contains(&source) && (1..=self.rounds).contains(&round));
        self.values[(round - 1) * self.sources + (source - 1)]
    }

    /// All service times of round `r` (1-based).
    pub fn round(&self, round: usize) -> &[f64] {
        assert!((1..=self.rounds).contains(&round));
        &self.values[(round - 1) * self.sources..round * self.sources]
    }

    /// Sum of `V_u(r)` over `u ∈ from..=to`; zero for an empty range or `r = 0`.
    pub fn partial_sum(&self, round: usize, from: usize, to: usize) -> f64 {
        if round == 0 || from > to {
            return 0.0;
        }
        self.round(round)[from - 1..to].iter().sum()
    }

    pub fn rounds_iter(&self) -> MatrixRounds<'_> {
        MatrixRounds { matrix: self, next: 1 }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Reads a [`ServiceMatrix`] round by round.
#[derive(Debug, Clone)]
pub struct MatrixRounds<'a> {
    matrix: &'a ServiceMatrix,
    next: usize,
}

impl ServiceSource for MatrixRounds<'_> {
    fn sources(&self) -> usize {
        self.matrix.sources
    }

    fn next_round(&mut self, out: &mut [f64]) -> bool {
        if self.next > self.matrix.rounds {
            return false;
        }
        out.copy_from_slice(self.matrix.round(self.next));
        self.next += 1;
        true
    }
}

/// Draws an `n × K` matrix of i.i.d. service times, deterministic in `seed`.
pub fn generate_service_matrix(
    model: &TransmissionModel,
    sources: usize,
    rounds: usize,
    seed: u64,
) -> ServiceMatrix {
    let mut stream = SampledRounds::new(model.clone(), sources, seed);
    let mut values = alloc::vec![0.0; sources * rounds];
    for row in values.chunks_exact_mut(sources.max(1)) {
        stream.next_round(row);
    }
    ServiceMatrix { sources, rounds, values }
}

/// Selects one of the three engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineKind {
    /// FCFS via the waiting-time recursion of the first source.
    FcfsRecursive,
    /// FCFS via an explicit server timeline with per-source queues.
    FcfsEventDriven,
    SinglePacket,
}

impl EngineKind {
    /// Default engine for a discipline.
    pub fn for_discipline(discipline: Discipline) -> Self {
        match discipline {
            Discipline::Fcfs => EngineKind::FcfsRecursive,
            Discipline::SinglePacket => EngineKind::SinglePacket,
        }
    }

    pub fn run<S, F>(self, config: &SystemConfig, source: S, sink: F) -> Result<RunStats, EngineError>
    where
        S: ServiceSource,
        F: FnMut(&PeakAgeRecord),
    {
        match self {
            EngineKind::FcfsRecursive => run_fcfs_recursive(config, source, sink),
            EngineKind::FcfsEventDriven => run_fcfs_event_driven(config, source, sink),
            EngineKind::SinglePacket => run_single_packet(config, source, sink),
        }
    }
}

/// Runs `engine` over a pre-drawn matrix and collects every record, ordered
/// by departure.
pub fn collect_records(
    engine: EngineKind,
    config: &SystemConfig,
    matrix: &ServiceMatrix,
) -> Result<Vec<PeakAgeRecord>, EngineError> {
    let mut records = Vec::new();
    engine.run(config, matrix.rounds_iter(), |r: &PeakAgeRecord| records.push(*r))?;
    Ok(records)
}

fn check_source<S: ServiceSource>(config: &SystemConfig, source: &S) -> Result<(), EngineError> {
    config.validate()?;
    if source.sources() != config.sources {
        return Err(EngineError::SourceMismatch { expected: config.sources, actual: source.sources() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: usize, b: f64) -> SystemConfig {
        SystemConfig { sources: n, b, discipline: Discipline::Fcfs, rounds: 10, burn_in: 0, seed: 1 }
    }

    #[test]
    fn validates_config() {
        assert!(config(2, 1.0).validate().is_ok());
        assert!(config(0, 1.0).validate().is_err());
        assert!(config(2, 0.0).validate().is_err());
        let mut c = config(2, 1.0);
        c.burn_in = 10;
        assert!(c.validate().is_err());
    }

    #[test]
    fn latest_batch_counts_arrival_at_t() {
        let c = config(3, 0.1);
        for m in 0..1000u64 {
            let t = c.batch_time(m);
            assert_eq!(c.latest_batch(t), m);
            if m > 0 {
                assert_eq!(c.latest_batch(t - 1e-9), m - 1);
            }
        }
    }

    #[test]
    fn matrix_generation_is_deterministic() {
        let det = TransmissionModel::deterministic(5.0).unwrap();
        let m = generate_service_matrix(&det, 2, 3, 0);
        assert_eq!(m, ServiceMatrix::constant(2, 3, 5.0));

        let p = TransmissionModel::poisson(3.0).unwrap();
        let a = generate_service_matrix(&p, 4, 50, 42);
        assert_eq!(a, generate_service_matrix(&p, 4, 50, 42));
        assert_ne!(a, generate_service_matrix(&p, 4, 50, 43));
    }

    #[test]
    fn streamed_rounds_match_matrix_rows() {
        let p = TransmissionModel::poisson(3.0).unwrap();
        let m = generate_service_matrix(&p, 3, 20, 7);
        let mut stream = SampledRounds::new(p, 3, 7);
        let mut row = [0.0; 3];
        for r in 1..=20 {
            assert!(stream.next_round(&mut row));
            assert_eq!(&row, m.round(r));
        }
    }

    #[test]
    fn poisson_matrix_grand_mean() {
        let p = TransmissionModel::poisson(3.0).unwrap();
        let m = generate_service_matrix(&p, 10, 100_000, 5);
        let se = (3.0f64 / 1_000_000.0).sqrt();
        assert!((m.mean() - 3.0).abs() < 3.0 * se, "{}", m.mean());
    }

    #[test]
    fn digest_tracks_content() {
        let p = TransmissionModel::poisson(3.0).unwrap();
        let mut row = [0.0; 4];
        let mut a = DigestRounds::new(SampledRounds::new(p.clone(), 4, 1));
        let mut b = DigestRounds::new(SampledRounds::new(p.clone(), 4, 1));
        let mut c = DigestRounds::new(SampledRounds::new(p, 4, 2));
        for _ in 0..100 {
            a.next_round(&mut row);
            b.next_round(&mut row);
            c.next_round(&mut row);
        }
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn matrix_rounds_exhaust() {
        let m = ServiceMatrix::constant(2, 2, 1.0);
        let mut it = m.rounds_iter();
        let mut row = [0.0; 2];
        assert!(it.next_round(&mut row));
        assert!(it.next_round(&mut row));
        assert!(!it.next_round(&mut row));
    }
}
