//! FCFS queues: the waiting-time recursion, an explicit event-driven
//! timeline, and the closed-form peak age used to cross-check both.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::{check_source, EngineError, PeakAgeRecord, RunStats, ServiceMatrix, ServiceSource, SystemConfig};

/// FCFS via the first-source waiting time
/// `W₁(k) = (W₁(k-1) + Σᵤ Vᵤ(k-1) - nb)⁺`, `W₁(1) = 0`.
///
/// Source `i` then waits `Wᵢ(k) = W₁(k) + Σ_{u<i} Vᵤ(k)` and its peak age is
/// `Aᵢ(k) = W₁(k) + Σ_{u≤i} Vᵤ(k) + nb`.
pub fn run_fcfs_recursive<S, F>(
    config: &SystemConfig,
    mut source: S,
    mut sink: F,
) -> Result<RunStats, EngineError>
where
    S: ServiceSource,
    F: FnMut(&PeakAgeRecord),
{
    check_source(config, &source)?;
    let nb = config.period();
    let mut row = vec![0.0; config.sources];
    let mut stats = RunStats::default();
    let mut first_wait = 0.0;
    let mut prev_round_total = 0.0;
    let mut last_departure = 0.0;

    for k in 1..=config.rounds {
        if !source.next_round(&mut row) {
            return Err(EngineError::Exhausted(k - 1));
        }
        if k > 1 {
            first_wait = (first_wait + prev_round_total - nb).max(0.0);
        }
        let generation = config.batch_time(k);
        let prev_generation = config.batch_time(k - 1);
        let mut prefix = 0.0;
        for (idx, &service) in row.iter().enumerate() {
            let waiting = first_wait + prefix;
            prefix += service;
            last_departure = generation + waiting + service;
            sink(&PeakAgeRecord {
                source: idx + 1,
                k,
                prev_generation,
                generation,
                waiting,
                service,
                idle: 0.0,
                preempted: 0,
                departure: last_departure,
                peak_age: first_wait + prefix + nb,
                prev_batch: k - 1,
                batch: k,
            });
        }
        prev_round_total = prefix;
        stats.busy_time += prefix;
        stats.delivered += config.sources as u64;
    }
    stats.idle_time = last_departure - stats.busy_time;
    Ok(stats)
}

/// FCFS on an explicit server timeline.
///
/// Each source has its own queue of pending batch indices. The server visits
/// the sources cyclically; when the visited queue is empty it idles until the
/// next batch arrives. Arrivals at the instant the server frees up are
/// enqueued before the next service starts.
pub fn run_fcfs_event_driven<S, F>(
    config: &SystemConfig,
    mut source: S,
    mut sink: F,
) -> Result<RunStats, EngineError>
where
    S: ServiceSource,
    F: FnMut(&PeakAgeRecord),
{
    check_source(config, &source)?;
    let n = config.sources;
    let mut row = vec![0.0; n];
    let mut queues: Vec<VecDeque<u64>> = vec![VecDeque::new(); n];
    let mut next_batch = 1u64;
    let mut clock = 0.0;
    let mut stats = RunStats::default();

    let admit = |clock: f64, next_batch: &mut u64, queues: &mut [VecDeque<u64>]| {
        while config.batch_time(*next_batch) <= clock {
            for q in queues.iter_mut() {
                q.push_back(*next_batch);
            }
            *next_batch += 1;
        }
    };

    for k in 1..=config.rounds {
        if !source.next_round(&mut row) {
            return Err(EngineError::Exhausted(k - 1));
        }
        for (idx, &service) in row.iter().enumerate() {
            admit(clock, &mut next_batch, &mut queues);
            if queues[idx].is_empty() {
                if queues.iter().any(|q| !q.is_empty()) {
                    stats.idle_with_backlog += 1;
                }
                let arrival = config.batch_time(next_batch);
                stats.idle_time += arrival - clock;
                clock = arrival;
                admit(clock, &mut next_batch, &mut queues);
            }
            let batch = queues[idx].pop_front().expect("queue refilled by the arrival");
            debug_assert_eq!(batch, k, "FCFS round robin serves batch k in round k");
            let generation = config.batch_time(batch);
            let prev_generation = config.batch_time(batch - 1);
            let start = clock;
            clock = start + service;
            stats.busy_time += service;
            stats.delivered += 1;
            sink(&PeakAgeRecord {
                source: idx + 1,
                k,
                prev_generation,
                generation,
                waiting: start - generation,
                service,
                idle: 0.0,
                preempted: 0,
                departure: clock,
                peak_age: clock - prev_generation,
                prev_batch: batch - 1,
                batch,
            });
        }
    }
    Ok(stats)
}

/// Peak age of update `k` of source `i` in closed form:
///
/// `Aᵢ(k) = max_{1≤s≤k} { Σ_{r=s}^{k-1} Σᵤ Vᵤ(r) + Σ_{u≤i} Vᵤ(k) - (k-s-1)·nb }`,
///
/// evaluated term by term without reusing partial sums across `s`.
pub fn fcfs_peak_age_oracle(matrix: &ServiceMatrix, n: usize, b: f64, i: usize, k: usize) -> f64 {
    assert_eq!(matrix.sources(), n);
    assert!((1..=n).contains(&i) && (1..=matrix.rounds()).contains(&k));
    let nb = n as f64 * b;
    let own_round = matrix.partial_sum(k, 1, i);
    (1..=k)
        .map(|s| {
            let backlog: f64 = (s..k).map(|r| matrix.partial_sum(r, 1, n)).sum();
            backlog + own_round - (k as f64 - s as f64 - 1.0) * nb
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
