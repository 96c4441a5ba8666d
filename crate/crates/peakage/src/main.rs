use std::process::ExitCode;

use clap::error::ErrorKind;
use peakage::{fit_decay_slope, parse_spec, run_pipeline, SpecError};
use peakage_core::Discipline;

fn main() -> ExitCode {
    let spec = match parse_spec(std::env::args_os()) {
        Ok(spec) => spec,
        Err(SpecError::Cli(err)) if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(SpecError::Cli(err)) => {
            let _ = err.print();
            return ExitCode::from(1);
        }
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(1);
        }
    };

    let output = match run_pipeline(&spec) {
        Ok(output) => output,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    };
    for warning in &output.warnings {
        eprintln!("warning: {warning}");
    }
    for &discipline in &spec.disciplines {
        let rows: Vec<_> = output.rows.iter().filter(|r| r.discipline == discipline).cloned().collect();
        let name = match discipline {
            Discipline::Fcfs => "fcfs",
            Discipline::SinglePacket => "single-packet",
        };
        match fit_decay_slope(&rows) {
            Ok(fit) => {
                let rate = rows.last().and_then(|r| r.rate);
                eprint!("{name}: fitted slope {:.5} over n = {:?}", fit.line.slope, fit.n_used);
                match rate {
                    Some(rate) => eprintln!(", predicted -{rate:.5}"),
                    None => eprintln!(),
                }
            }
            Err(err) => eprintln!("{name}: no slope fit ({err})"),
        }
    }
    ExitCode::SUCCESS
}
