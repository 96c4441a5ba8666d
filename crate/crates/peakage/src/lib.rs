//! Command-line harness around [`peakage_core`]: experiment specs, parallel
//! sweeps over the number of sources, decay-slope fits and CSV output.

pub mod fit;
pub mod output;
pub mod spec;
pub mod sweep;

use std::fs::File;
use std::io::{self, BufWriter};

pub use fit::{fit_decay_slope, DecayFit, FitError};
pub use spec::{parse_spec, parse_spec_with, ExperimentSpec, SourceChoice, SpecError};
pub use sweep::{run_sweep, BoundRow, HarnessError, SweepOutput, SweepRow};

/// Runs the sweep described by `spec` and writes every requested file:
/// the sweep CSV (stdout without `--out`), its sibling bounds CSV and the
/// optional record dump.
pub fn run_pipeline(spec: &ExperimentSpec) -> Result<SweepOutput, HarnessError> {
    let result = sweep::run_sweep(spec)?;
    match &spec.out {
        Some(path) => {
            output::write_sweep(&result.rows, BufWriter::new(File::create(path)?))?;
            if spec.bounds {
                let bounds = BufWriter::new(File::create(output::bounds_path(path))?);
                output::write_bounds(&result.bounds, bounds)?;
            }
        }
        None => output::write_sweep(&result.rows, io::stdout().lock())?,
    }
    if let Some(path) = &spec.records {
        let mut writer = output::RecordWriter::new(BufWriter::new(File::create(path)?))?;
        let mut failure = None;
        sweep::replay_records(spec, |r| {
            if failure.is_none() {
                failure = writer.write(r).err();
            }
        })?;
        if let Some(err) = failure {
            return Err(err);
        }
        writer.finish()?;
    }
    Ok(result)
}
