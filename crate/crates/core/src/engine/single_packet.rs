//! Single-packet queues.
//!
//! Each source buffers at most one packet. A batch arrival overwrites the
//! waiting packet of every source; a packet already in service always
//! completes. Idle time and preemption counts are measured on the timeline,
//! which makes the closed-form expressions in [`lemma2_preemptions`] and
//! [`lemma3_rhs`] checkable identities rather than definitions.

use alloc::vec;

use super::{check_source, EngineError, PeakAgeRecord, RunStats, ServiceMatrix, ServiceSource, SystemConfig};

#[derive(Debug, Clone, Copy, Default)]
struct SourceState {
    /// Batch index of the latest delivered packet (0 = the `S(0)` reference).
    delivered_batch: u64,
    /// Value of the server's cumulative idle time at the latest departure.
    idle_mark: f64,
}

/// Event-driven simulation of the single-packet discipline.
///
/// `idle` in each record is the server idle time accumulated between the
/// source's previous departure (time 0 for the first update) and the start of
/// this service; `preempted` counts the batches of this source that were
/// overwritten in between.
pub fn run_single_packet<S, F>(
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
    let mut states = vec![SourceState::default(); n];
    let mut clock = 0.0;
    let mut total_idle = 0.0;
    let mut stats = RunStats::default();

    for k in 1..=config.rounds {
        if !source.next_round(&mut row) {
            return Err(EngineError::Exhausted(k - 1));
        }
        for (idx, &service) in row.iter().enumerate() {
            let mut batch = config.latest_batch(clock);
            if batch <= states[idx].delivered_batch {
                // Empty queue: wait for the next batch.
                if states.iter().any(|s| s.delivered_batch < batch) {
                    stats.idle_with_backlog += 1;
                }
                batch += 1;
                let arrival = config.batch_time(batch);
                total_idle += arrival - clock;
                clock = arrival;
            }
            let state = &mut states[idx];
            let generation = config.batch_time(batch);
            let start = clock;
            clock = start + service;
            stats.busy_time += service;
            stats.delivered += 1;
            let prev_generation = config.batch_time(state.delivered_batch);
            sink(&PeakAgeRecord {
                source: idx + 1,
                k,
                prev_generation,
                generation,
                waiting: start - generation,
                service,
                idle: total_idle - state.idle_mark,
                preempted: batch - state.delivered_batch - 1,
                departure: clock,
                peak_age: clock - prev_generation,
                prev_batch: state.delivered_batch,
                batch,
            });
            state.delivered_batch = batch;
            state.idle_mark = total_idle;
        }
    }
    stats.idle_time = total_idle;
    Ok(stats)
}

fn check_pair(
    prev: Option<&PeakAgeRecord>,
    cur: &PeakAgeRecord,
    matrix: &ServiceMatrix,
) -> Result<(), EngineError> {
    match prev {
        Some(p) if p.source != cur.source || p.k + 1 != cur.k => return Err(EngineError::NonConsecutive),
        None if cur.k != 1 => return Err(EngineError::NonConsecutive),
        _ => {}
    }
    if cur.k as usize > matrix.rounds() {
        return Err(EngineError::RoundOutOfRange(cur.k));
    }
    if cur.source == 0 || cur.source > matrix.sources() {
        return Err(EngineError::NonConsecutive);
    }
    Ok(())
}

/// `W_i(k-1) + Σ_{u≥i} V_u(k-1) + N_i(k-1) + Σ_{u<i} V_u(k)`: the time from
/// the generation of update `k-1` to the service start of update `k`.
fn span_to_service(prev: Option<&PeakAgeRecord>, cur: &PeakAgeRecord, matrix: &ServiceMatrix) -> f64 {
    let n = matrix.sources();
    let i = cur.source;
    let prev_round = (cur.k - 1) as usize;
    let prev_wait = prev.map_or(0.0, |p| p.waiting);
    prev_wait
        + matrix.partial_sum(prev_round, i, n)
        + cur.idle
        + matrix.partial_sum(cur.k as usize, 1, i - 1)
}

/// Right-hand side of the single-packet peak-age identity
/// `A_i(k) = W_i(k-1) + Σ_{u=i}^{n} V_u(k-1) + N_i(k-1) + Σ_{u=1}^{i} V_u(k)`.
///
/// `prev` is the previous delivered update of the same source, or `None` for
/// the first update, whose predecessor is the zero-wait reference at time 0.
pub fn lemma3_rhs(
    prev: Option<&PeakAgeRecord>,
    cur: &PeakAgeRecord,
    matrix: &ServiceMatrix,
) -> Result<f64, EngineError> {
    check_pair(prev, cur, matrix)?;
    Ok(span_to_service(prev, cur, matrix) + matrix.get(cur.source, cur.k as usize))
}

/// Preemption count predicted from waiting, service and idle times:
///
/// `p_i(k-1) = ⌊(W_i(k-1) + Σ_{u≥i} V_u(k-1) + N_i(k-1) + Σ_{u<i} V_u(k) - nb) / nb⌋`.
///
/// The quotient is snapped to the nearest integer when it lies within a
/// relative 1e-9 of it, so a service that starts exactly at a batch arrival
/// is not pushed below the integer by summation rounding.
pub fn lemma2_preemptions(
    prev: Option<&PeakAgeRecord>,
    cur: &PeakAgeRecord,
    matrix: &ServiceMatrix,
    period: f64,
) -> Result<u64, EngineError> {
    check_pair(prev, cur, matrix)?;
    let quotient = (span_to_service(prev, cur, matrix) - period) / period;
    let nearest = libm::round(quotient);
    let snapped = if (quotient - nearest).abs() <= 1e-9 * quotient.abs().max(1.0) {
        nearest
    } else {
        libm::floor(quotient)
    };
    Ok(snapped.max(0.0) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{collect_records, Discipline, EngineKind};
    use alloc::vec::Vec;

    fn config(n: usize, b: f64, rounds: u64) -> SystemConfig {
        SystemConfig { sources: n, b, discipline: Discipline::SinglePacket, rounds, burn_in: 0, seed: 0 }
    }

    fn records(c: &SystemConfig, m: &ServiceMatrix) -> Vec<PeakAgeRecord> {
        collect_records(EngineKind::SinglePacket, c, m).unwrap()
    }

    fn find(records: &[PeakAgeRecord], source: usize, k: u64) -> PeakAgeRecord {
        *records.iter().find(|r| r.source == source && r.k == k).unwrap()
    }

    #[test]
    fn unit_service_two_sources() {
        // Batches every 4; services [4k, 4k+1] and [4k+1, 4k+2], then idle 2.
        let c = config(2, 2.0, 6);
        let m = ServiceMatrix::constant(2, 6, 1.0);
        let recs = records(&c, &m);
        for k in 2..=6 {
            let r1 = find(&recs, 1, k);
            let r2 = find(&recs, 2, k);
            assert_eq!((r1.peak_age, r1.idle, r1.preempted), (5.0, 2.0, 0));
            assert_eq!((r2.peak_age, r2.idle, r2.preempted), (6.0, 2.0, 0));
            let p1 = find(&recs, 1, k - 1);
            let p2 = find(&recs, 2, k - 1);
            assert_eq!(lemma3_rhs(Some(&p1), &r1, &m).unwrap(), 5.0);
            assert_eq!(lemma3_rhs(Some(&p2), &r2, &m).unwrap(), 6.0);
        }
    }

    #[test]
    fn zero_service_single_source() {
        let c = config(1, 5.0, 5);
        let m = ServiceMatrix::constant(1, 5, 0.0);
        let recs = records(&c, &m);
        assert!(recs.iter().all(|r| r.peak_age == 5.0));
        for w in recs.windows(2) {
            assert_eq!(lemma3_rhs(Some(&w[0]), &w[1], &m).unwrap(), 5.0);
        }
    }

    #[test]
    fn long_service_preempts_waiting_packets() {
        // nb = 2. Source 1 occupies [2, 7]; batches 2 and 3 arrive meanwhile,
        // so source 2 skips batches 1 and 2 and sends batch 3 (generated at 6).
        let c = config(2, 1.0, 4);
        let mut rows = vec![vec![5.0, 0.0]];
        rows.extend((0..3).map(|_| vec![0.0, 0.0]));
        let m = ServiceMatrix::from_rounds(&rows);
        let recs = records(&c, &m);

        let first = find(&recs, 2, 1);
        assert_eq!((first.generation, first.preempted, first.departure), (6.0, 2, 7.0));
        assert_eq!(first.idle, 2.0);
        assert_eq!(lemma2_preemptions(None, &first, &m, 2.0).unwrap(), 2);
        assert_eq!(lemma3_rhs(None, &first, &m).unwrap(), first.peak_age);

        let s1 = find(&recs, 1, 2);
        assert_eq!((s1.generation, s1.preempted), (6.0, 1));
        assert_eq!(lemma2_preemptions(Some(&find(&recs, 1, 1)), &s1, &m, 2.0).unwrap(), 1);

        for src in 1..=2 {
            for k in 2..=4 {
                let (p, cur) = (find(&recs, src, k - 1), find(&recs, src, k));
                assert_eq!(lemma2_preemptions(Some(&p), &cur, &m, 2.0).unwrap(), cur.preempted);
                assert!((lemma3_rhs(Some(&p), &cur, &m).unwrap() - cur.peak_age).abs() < 1e-12);
                assert_eq!(cur.batch - cur.prev_batch, cur.preempted + 1);
            }
        }
    }

    #[test]
    fn waiting_never_reaches_a_period() {
        let c = config(3, 1.0, 50);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|r| (0..3).map(|u| ((r * 7 + u * 3) % 11) as f64 * 0.7).collect())
            .collect();
        let m = ServiceMatrix::from_rounds(&rows);
        let mut stats = RunStats::default();
        let mut recs = Vec::new();
        stats = run_single_packet(&c, m.rounds_iter(), |r| recs.push(*r)).unwrap_or(stats);
        assert_eq!(stats.idle_with_backlog, 0);
        for r in &recs {
            assert!(r.waiting >= 0.0 && r.waiting < 3.0, "{r:?}");
            assert!(r.idle >= 0.0);
        }
    }

    #[test]
    fn rejects_mismatched_pairs() {
        let c = config(2, 2.0, 3);
        let m = ServiceMatrix::constant(2, 3, 1.0);
        let recs = records(&c, &m);
        let (a, b) = (find(&recs, 1, 1), find(&recs, 2, 2));
        assert_eq!(lemma3_rhs(Some(&a), &b, &m), Err(EngineError::NonConsecutive));
        assert_eq!(lemma3_rhs(None, &find(&recs, 1, 2), &m), Err(EngineError::NonConsecutive));
        let short = ServiceMatrix::constant(2, 1, 1.0);
        assert_eq!(
            lemma3_rhs(Some(&a), &find(&recs, 1, 2), &short),
            Err(EngineError::RoundOutOfRange(2))
        );
    }
}
