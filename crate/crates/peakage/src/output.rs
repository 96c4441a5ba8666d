//! CSV emission for sweeps, bounds and per-update records.

use std::io::Write;
use std::path::{Path, PathBuf};

use peakage_core::{Discipline, PeakAgeRecord};

use crate::sweep::{BoundRow, HarnessError, SweepRow};

pub const SWEEP_HEADER: [&str; 16] = [
    "n",
    "discipline",
    "source",
    "samples",
    "events",
    "p_hat",
    "ci_low",
    "ci_high",
    "ci_half_width",
    "log_p_hat",
    "rate",
    "r_star",
    "upper_log_bound",
    "lower_log_bound",
    "batches",
    "service_digest",
];

pub const BOUNDS_HEADER: [&str; 10] =
    ["n", "kind", "discipline", "x", "b", "alpha", "rate", "r_star", "theta_star", "log_bound"];

pub const RECORDS_HEADER: [&str; 10] = ["source", "k", "S_prev", "S", "W", "V", "N", "p", "D", "A"];

fn discipline_name(d: Discipline) -> &'static str {
    match d {
        Discipline::Fcfs => "fcfs",
        Discipline::SinglePacket => "single-packet",
    }
}

fn float(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

/// Formats like C's `%.9g`: nine significant digits, trailing zeros dropped,
/// scientific notation outside `1e-4 ≤ |v| < 1e9`.
pub fn format_sig9(v: f64) -> String {
    if !v.is_finite() {
        return float(v);
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        let e = &r.estimate;
        w.write_record([
            r.n.to_string(),
            discipline_name(r.discipline).into(),
            r.source.map_or_else(|| "all".to_string(), |i| i.to_string()),
            e.samples.to_string(),
            e.events.to_string(),
            float(e.p_hat),
            float(e.ci_low),
            float(e.ci_high),
            float(e.half_width),
            float(e.log_p_hat()),
            opt_float(r.rate),
            opt(r.r_star),
            opt_float(r.upper_log),
            opt_float(r.lower_log),
            e.batches.to_string(),
            format!("{:016x}", r.digest),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bounds<W: Write>(rows: &[BoundRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOUNDS_HEADER)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.kind.name().into(),
            discipline_name(r.discipline).into(),
            float(r.x),
            float(r.b),
            float(r.alpha),
            float(r.rate),
            opt(r.r_star),
            opt_float(r.theta_star),
            float(r.log_bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Streaming writer for the per-update record dump.
#[derive(Debug)]
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(out: W) -> Result<Self, HarnessError> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(RECORDS_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &PeakAgeRecord) -> Result<(), HarnessError> {
        self.inner.write_record([
            r.source.to_string(),
            r.k.to_string(),
            format_sig9(r.prev_generation),
            format_sig9(r.generation),
            format_sig9(r.waiting),
            format_sig9(r.service),
            format_sig9(r.idle),
            r.preempted.to_string(),
            format_sig9(r.departure),
            format_sig9(r.peak_age),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), HarnessError> {
        self.inner.flush()?;
        Ok(())
    }
}

/// `sweep.csv` → `sweep.bounds.csv`.
pub fn bounds_path(sweep: &Path) -> PathBuf {
    let stem = sweep.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    sweep.with_file_name(format!("{stem}.bounds.csv"))
}
