use std::fs;
use std::process::Command;

use peakage::spec::{DEFAULT_BURN_IN, DEFAULT_REPS, DEFAULT_ROUNDS, DEFAULT_SEED};
use peakage::{parse_spec, parse_spec_with, SourceChoice, SpecError};
use peakage_core::Discipline;

fn args(line: &str) -> Vec<String> {
    std::iter::once("peakage".to_string()).chain(line.split_whitespace().map(String::from)).collect()
}

fn peakage() -> Command {
    Command::new(env!("CARGO_BIN_EXE_peakage"))
}

#[test]
fn sweep_flag_expands_inclusively() {
    let spec = parse_spec(args("--dist poisson:3 --b 5 --x 10 --sweep-n 4:2:24 --discipline fcfs")).unwrap();
    assert_eq!(spec.n_list, (4..=24).step_by(2).collect::<Vec<_>>());
    assert_eq!(spec.disciplines, vec![Discipline::Fcfs]);
    assert_eq!((spec.b, spec.x), (5.0, 10.0));
}

#[test]
fn bare_distribution_takes_defaults() {
    let spec = parse_spec(args("--dist det:5")).unwrap();
    assert_eq!(spec.rounds, DEFAULT_ROUNDS);
    assert_eq!(spec.rounds, 1_000_000);
    assert_eq!(spec.burn_in, DEFAULT_BURN_IN);
    assert_eq!(spec.burn_in, 1_000);
    assert_eq!(spec.reps, DEFAULT_REPS);
    assert_eq!(spec.seed, DEFAULT_SEED);
    assert_eq!(spec.source, SourceChoice::Last);
    assert_eq!(spec.source_for(7), Some(7));
    assert!(spec.bounds);
}

#[test]
fn probabilities_above_one_are_rejected() {
    let err = parse_spec(args("--dist disc:1:0.5,3:0.6")).unwrap_err();
    assert!(matches!(err, SpecError::Distribution(_)), "{err:?}");
}

#[test]
fn flags_override_config_values() {
    let config = "# sweep\ndist = poisson:3\nsweep-n = 4:4:12\nseed = 9 # trailing comment\nrounds = 5000\n";
    let spec = parse_spec_with(args("--seed 3"), config).unwrap();
    assert_eq!(spec.n_list, vec![4, 8, 12]);
    assert_eq!(spec.seed, 3);
    assert_eq!(spec.rounds, 5000);

    let spec = parse_spec_with(args("--n 2,3"), config).unwrap();
    assert_eq!(spec.n_list, vec![2, 3]);
}

#[test]
fn config_errors_are_reported() {
    let err = parse_spec_with(args(""), "dist = det:1\nwidth = 3\n").unwrap_err();
    assert!(matches!(err, SpecError::UnknownKey { line: 2, .. }), "{err:?}");
    let err = parse_spec_with(args(""), "dist det:1\n").unwrap_err();
    assert!(matches!(err, SpecError::ConfigSyntax { line: 1, .. }), "{err:?}");
    let err = parse_spec_with(args(""), "dist = det:1\nn = 3\nsweep-n = 1:1:2\n").unwrap_err();
    assert!(matches!(err, SpecError::Invalid { key: "n", .. }), "{err:?}");
}

#[test]
fn invalid_specs_are_rejected() {
    for line in [
        "--dist det:1 --n 4,3",
        "--dist det:1 --n 3 --sweep-n 1:1:3",
        "--dist det:1 --sweep-n 4:0:8",
        "--dist det:1 --rounds 100 --burnin 100",
        "--dist det:1 --discipline lifo",
        "--dist det:1 --n 3,5 --source 4",
        "--dist det:1 --n 3,5 --records r.csv",
        "--dist det:1 --bounds maybe",
        "--b 5",
    ] {
        assert!(parse_spec(args(line)).is_err(), "{line}");
    }
    let spec = parse_spec(args("--dist det:1 --n 3,5 --source all")).unwrap();
    assert_eq!(spec.source_for(5), None);
}

#[test]
fn exit_codes() {
    let status = |line: &str| peakage().args(args(line).into_iter().skip(1)).output().unwrap().status.code();
    assert_eq!(status("--help"), Some(0));
    assert_eq!(status("--dist disc:1:0.5,3:0.6"), Some(1));
    assert_eq!(status("--dist det:1 --bogus"), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no/such/dir/out.csv");
    let line = format!("--dist det:1 --n 2 --rounds 200 --burnin 10 --out {}", missing.display());
    assert_eq!(status(&line), Some(2));
}

#[test]
fn writes_sweep_bounds_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let records = dir.path().join("records.csv");
    let status = peakage()
        .args(["--dist", "poisson:1", "--b", "2", "--x", "3", "--n", "3", "--discipline", "spq"])
        .args(["--rounds", "500", "--burnin", "100", "--batches", "4"])
        .arg("--out")
        .arg(&out)
        .arg("--records")
        .arg(&records)
        .status()
        .unwrap();
    assert!(status.success());

    let sweep = fs::read_to_string(&out).unwrap();
    let mut lines = sweep.lines();
    assert!(lines.next().unwrap().starts_with("n,discipline,source,samples,events,p_hat"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..4], &["3", "single-packet", "3", "400"]);
    assert_eq!(lines.next(), None);

    let bounds = fs::read_to_string(dir.path().join("sweep.bounds.csv")).unwrap();
    assert!(bounds.lines().any(|l| l.starts_with("3,sp-upper,single-packet,")), "{bounds}");

    let dump = fs::read_to_string(&records).unwrap();
    assert_eq!(dump.lines().next().unwrap(), "source,k,S_prev,S,W,V,N,p,D,A");
    assert_eq!(dump.lines().count(), 1 + 3 * 500);
}

#[test]
fn unstable_fcfs_warns_but_succeeds() {
    let output = peakage()
        .args(["--dist", "det:3", "--b", "2", "--n", "2", "--rounds", "300", "--burnin", "10"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("warning:") && stderr.contains("unstable"), "{stderr}");
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 3);
    assert!(stdout.contains("2,fcfs,2,") && stdout.contains("2,single-packet,2,"), "{stdout}");
}
