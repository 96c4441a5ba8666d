//! Experiment specification from command-line flags and an optional
//! `key = value` config file.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Parser;
use peakage_core::{DistError, Discipline, TransmissionModel};

pub const DEFAULT_ROUNDS: u64 = 1_000_000;
pub const DEFAULT_BURN_IN: u64 = 1_000;
pub const DEFAULT_REPS: u32 = 1;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_B: f64 = 5.0;
pub const DEFAULT_X: f64 = 10.0;
pub const DEFAULT_N: usize = 10;
pub const DEFAULT_BATCHES: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error(transparent)]
    Cli(#[from] clap::Error),
    #[error("cannot read config file {path}: {source}")]
    ConfigRead { path: PathBuf, source: std::io::Error },
    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },
    #[error("config line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid value for {key}: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("invalid distribution: {0}")]
    Distribution(#[from] DistError),
}

impl SpecError {
    fn invalid(key: &'static str, message: impl Into<String>) -> Self {
        SpecError::Invalid { key, message: message.into() }
    }
}

/// Flags as given on the command line; unset flags fall back to the config
/// file, then to the defaults.
#[derive(Debug, Parser)]
#[command(name = "peakage", version, about = "Peak age-of-information outage sweeps over the number of sources")]
struct Cli {
    /// Transmission-time model, e.g. `poisson:3`, `det:1`, `exp:0.5`, `geom:0.4`, `disc:1:0.5,3:0.5`
    #[arg(long)]
    dist: Option<String>,
    /// Per-source sampling parameter (batches arrive every n·b)
    #[arg(long)]
    b: Option<f64>,
    /// Per-source outage threshold (outage when A ≥ n·x)
    #[arg(long)]
    x: Option<f64>,
    /// Number of sources, or a comma-separated list
    #[arg(long)]
    n: Option<String>,
    /// Inclusive sweep `lo:step:hi` over the number of sources
    #[arg(long = "sweep-n")]
    sweep_n: Option<String>,
    /// fcfs, spq or both
    #[arg(long)]
    discipline: Option<String>,
    /// Rounds per replication, including burn-in
    #[arg(long)]
    rounds: Option<u64>,
    /// Leading rounds excluded from estimation
    #[arg(long)]
    burnin: Option<u64>,
    /// Independent replications per sweep point
    #[arg(long)]
    reps: Option<u32>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Source under study: an index, `last` (the default, source n) or `all`
    #[arg(long)]
    source: Option<SourceChoice>,
    /// on or off
    #[arg(long)]
    bounds: Option<String>,
    /// Batches per replication for the confidence interval
    #[arg(long)]
    batches: Option<usize>,
    /// Sweep CSV path; bounds go to the sibling `.bounds.csv`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-update record dump (single n and discipline only)
    #[arg(long)]
    records: Option<PathBuf>,
    /// Config file of `key = value` lines named like the flags
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Which updates enter the outage estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceChoice {
    /// Source `n` at every sweep point.
    Last,
    /// A fixed source index.
    Index(usize),
    /// Updates of every source, pooled.
    ///
    /// Under the single-packet discipline the stationary outage probability
    /// is the same for every source, and pooling over the positions in the
    /// service cycle estimates it even when the cycle's starting point mixes
    /// too slowly for a single source's estimate to settle.
    All,
}

impl FromStr for SourceChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last" => Ok(SourceChoice::Last),
            "all" => Ok(SourceChoice::All),
            other => other
                .parse::<usize>()
                .map(SourceChoice::Index)
                .map_err(|_| format!("expected a source index, `last` or `all`, got `{other}`")),
        }
    }
}

impl std::fmt::Display for SourceChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SourceChoice::Last => f.write_str("last"),
            SourceChoice::Index(i) => write!(f, "{i}"),
            SourceChoice::All => f.write_str("all"),
        }
    }
}

const CONFIG_KEYS: &[&str] = &[
    "dist", "b", "x", "n", "sweep-n", "discipline", "rounds", "burnin", "reps", "seed", "source",
    "bounds", "batches", "out", "records",
];

/// A validated sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub model: TransmissionModel,
    pub b: f64,
    pub x: f64,
    /// Strictly increasing.
    pub n_list: Vec<usize>,
    pub disciplines: Vec<Discipline>,
    pub rounds: u64,
    pub burn_in: u64,
    pub reps: u32,
    pub seed: u64,
    pub source: SourceChoice,
    pub bounds: bool,
    pub batches: usize,
    pub out: Option<PathBuf>,
    pub records: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Spec with the documented defaults for the given model.
    pub fn new(model: TransmissionModel) -> Self {
        Self {
            model,
            b: DEFAULT_B,
            x: DEFAULT_X,
            n_list: vec![DEFAULT_N],
            disciplines: vec![Discipline::Fcfs, Discipline::SinglePacket],
            rounds: DEFAULT_ROUNDS,
            burn_in: DEFAULT_BURN_IN,
            reps: DEFAULT_REPS,
            seed: DEFAULT_SEED,
            source: SourceChoice::Last,
            bounds: true,
            batches: DEFAULT_BATCHES,
            out: None,
            records: None,
        }
    }

    /// Fixed source studied at `n` sources; `None` when pooling all sources.
    pub fn source_for(&self, n: usize) -> Option<usize> {
        match self.source {
            SourceChoice::Last => Some(n),
            SourceChoice::Index(i) => Some(i),
            SourceChoice::All => None,
        }
    }

    /// Post-burn-in samples per replication.
    pub fn samples_per_rep(&self) -> u64 {
        self.rounds - self.burn_in
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(SpecError::invalid("b", "must be positive and finite"));
        }
        if !(self.x > 0.0 && self.x.is_finite()) {
            return Err(SpecError::invalid("x", "must be positive and finite"));
        }
        if self.n_list.is_empty() {
            return Err(SpecError::invalid("n", "at least one value is required"));
        }
        if self.n_list.contains(&0) {
            return Err(SpecError::invalid("n", "values must be positive"));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SpecError::invalid("n", "values must be strictly increasing"));
        }
        if self.disciplines.is_empty() {
            return Err(SpecError::invalid("discipline", "at least one discipline is required"));
        }
        if self.burn_in >= self.rounds {
            return Err(SpecError::invalid(
                "rounds",
                format!("{} rounds leave nothing after a burn-in of {}", self.rounds, self.burn_in),
            ));
        }
        if self.reps == 0 {
            return Err(SpecError::invalid("reps", "at least one replication is required"));
        }
        if self.batches == 0 {
            return Err(SpecError::invalid("batches", "at least one batch is required"));
        }
        if self.samples_per_rep() < self.batches as u64 {
            return Err(SpecError::invalid(
                "batches",
                format!("{} post-burn-in rounds cannot fill {} batches", self.samples_per_rep(), self.batches),
            ));
        }
        if let SourceChoice::Index(i) = self.source {
            let smallest = self.n_list[0];
            if i == 0 || i > smallest {
                return Err(SpecError::invalid(
                    "source",
                    format!("source {i} is outside 1..={smallest} for the smallest n"),
                ));
            }
        }
        if self.records.is_some() && (self.n_list.len() != 1 || self.disciplines.len() != 1) {
            return Err(SpecError::invalid("records", "a record dump needs a single n and a single discipline"));
        }
        Ok(())
    }
}

/// Parses `argv` (program name first), reading `--config` if given.
pub fn parse_spec<I, T>(argv: I) -> Result<ExperimentSpec, SpecError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let text = match &cli.config {
        Some(path) => Some(
            std::fs::read_to_string(path)
                .map_err(|source| SpecError::ConfigRead { path: path.clone(), source })?,
        ),
        None => None,
    };
    build(cli, text.as_deref())
}

/// Parses `argv` against the given config text instead of a `--config` file.
pub fn parse_spec_with<I, T>(argv: I, config_text: &str) -> Result<ExperimentSpec, SpecError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    build(Cli::try_parse_from(argv)?, Some(config_text))
}

fn parse_config(text: &str) -> Result<BTreeMap<String, String>, SpecError> {
    let mut values = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| SpecError::ConfigSyntax {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim().trim_start_matches("--").to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(SpecError::UnknownKey { line, key });
        }
        values.insert(key, value.trim().to_string());
    }
    Ok(values)
}

/// The flag value if given, otherwise the parsed config value.
fn merged<T: FromStr>(
    flag: Option<T>,
    file: &BTreeMap<String, String>,
    key: &'static str,
) -> Result<Option<T>, SpecError>
where
    T::Err: std::fmt::Display,
{
    if flag.is_some() {
        return Ok(flag);
    }
    file.get(key)
        .map(|raw| raw.parse::<T>().map_err(|e| SpecError::invalid(key, format!("`{raw}`: {e}"))))
        .transpose()
}

fn parse_n_list(raw: &str) -> Result<Vec<usize>, SpecError> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|e| SpecError::invalid("n", format!("`{}`: {e}", part.trim())))
        })
        .collect()
}

fn parse_sweep(raw: &str) -> Result<Vec<usize>, SpecError> {
    let parts: Vec<&str> = raw.split(':').collect();
    let [lo, step, hi] = parts.as_slice() else {
        return Err(SpecError::invalid("sweep-n", format!("expected lo:step:hi, got `{raw}`")));
    };
    let num = |s: &str| {
        s.trim().parse::<usize>().map_err(|e| SpecError::invalid("sweep-n", format!("`{s}`: {e}")))
    };
    let (lo, step, hi) = (num(lo)?, num(step)?, num(hi)?);
    if step == 0 {
        return Err(SpecError::invalid("sweep-n", "step must be positive"));
    }
    if lo == 0 || lo > hi {
        return Err(SpecError::invalid("sweep-n", format!("need 1 ≤ lo ≤ hi, got {lo}..{hi}")));
    }
    Ok((lo..=hi).step_by(step).collect())
}

fn parse_disciplines(raw: &str) -> Result<Vec<Discipline>, SpecError> {
    match raw {
        "fcfs" => Ok(vec![Discipline::Fcfs]),
        "spq" | "single-packet" => Ok(vec![Discipline::SinglePacket]),
        "both" => Ok(vec![Discipline::Fcfs, Discipline::SinglePacket]),
        other => Err(SpecError::invalid("discipline", format!("expected fcfs, spq or both, got `{other}`"))),
    }
}

fn parse_switch(raw: &str) -> Result<bool, SpecError> {
    match raw {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        other => Err(SpecError::invalid("bounds", format!("expected on or off, got `{other}`"))),
    }
}

fn build(cli: Cli, config_text: Option<&str>) -> Result<ExperimentSpec, SpecError> {
    let file = config_text.map(parse_config).transpose()?.unwrap_or_default();

    let dist: String = merged(cli.dist, &file, "dist")?
        .ok_or_else(|| SpecError::invalid("dist", "a transmission-time model is required"))?;
    let mut spec = ExperimentSpec::new(dist.parse()?);

    if let Some(b) = merged(cli.b, &file, "b")? {
        spec.b = b;
    }
    if let Some(x) = merged(cli.x, &file, "x")? {
        spec.x = x;
    }

    spec.n_list = match (cli.n, cli.sweep_n) {
        (Some(_), Some(_)) => return Err(SpecError::invalid("n", "give either --n or --sweep-n, not both")),
        (Some(n), None) => parse_n_list(&n)?,
        (None, Some(sweep)) => parse_sweep(&sweep)?,
        (None, None) => match (file.get("n"), file.get("sweep-n")) {
            (Some(_), Some(_)) => {
                return Err(SpecError::invalid("n", "config sets both n and sweep-n"));
            }
            (Some(n), None) => parse_n_list(n)?,
            (None, Some(sweep)) => parse_sweep(sweep)?,
            (None, None) => vec![DEFAULT_N],
        },
    };

    if let Some(raw) = merged::<String>(cli.discipline, &file, "discipline")? {
        spec.disciplines = parse_disciplines(&raw)?;
    }
    if let Some(rounds) = merged(cli.rounds, &file, "rounds")? {
        spec.rounds = rounds;
    }
    if let Some(burn_in) = merged(cli.burnin, &file, "burnin")? {
        spec.burn_in = burn_in;
    }
    if let Some(reps) = merged(cli.reps, &file, "reps")? {
        spec.reps = reps;
    }
    if let Some(seed) = merged(cli.seed, &file, "seed")? {
        spec.seed = seed;
    }
    if let Some(source) = merged(cli.source, &file, "source")? {
        spec.source = source;
    }
    if let Some(raw) = merged::<String>(cli.bounds, &file, "bounds")? {
        spec.bounds = parse_switch(&raw)?;
    }
    if let Some(batches) = merged(cli.batches, &file, "batches")? {
        spec.batches = batches;
    }
    spec.out = merged(cli.out, &file, "out")?;
    spec.records = merged(cli.records, &file, "records")?;

    spec.validate()?;
    Ok(spec)
}
