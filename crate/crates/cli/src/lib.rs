//! Experiment runner behind the `polyosc` binary.
//!
//! A run takes an [`ExperimentConfig`], dispatches to one command and returns
//! an [`Outcome`]: JSON records (with every inequality check spelled out) and
//! a CSV table of the main series.

pub mod commands;
pub mod config;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{Command, ExperimentConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "POLYOSC_OUT";

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Budget(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Budget(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Budget(m) => write!(f, "budget exceeded: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<polyosc::Error> for CliError {
    fn from(e: polyosc::Error) -> Self {
        match e {
            polyosc::Error::Guard(_) | polyosc::Error::Budget(_) => CliError::Budget(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

/// One inequality or identity check: `lhs <= constant * rhs + tolerance`
/// unless the relation says otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `lhs <= constant * rhs + tolerance`
    AtMost,
    /// `|lhs - constant * rhs| <= tolerance`
    Equal,
    /// `lhs >= constant * rhs - tolerance`
    AtLeast,
}

impl Check {
    pub fn new(name: impl Into<String>, relation: Relation, lhs: f64, rhs: f64, constant: f64, tolerance: f64) -> Self {
        let target = constant * rhs;
        let pass = match relation {
            Relation::AtMost => lhs <= target + tolerance,
            Relation::Equal => (lhs - target).abs() <= tolerance,
            Relation::AtLeast => lhs >= target - tolerance,
        };
        Self { name: name.into(), relation, lhs, rhs, constant, tolerance, pass }
    }

    pub fn at_most(name: impl Into<String>, lhs: f64, rhs: f64, constant: f64, tolerance: f64) -> Self {
        Self::new(name, Relation::AtMost, lhs, rhs, constant, tolerance)
    }

    pub fn equal(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Self::new(name, Relation::Equal, lhs, rhs, 1.0, tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub inputs_digest: String,
    pub outputs: serde_json::Value,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    pub version: String,
}

impl ResultRecord {
    pub fn violations(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }
}

/// Table emitted as CSV: one header row, then one row per series entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub config: ExperimentConfig,
    pub results: Vec<ResultRecord>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub document: Document,
    pub table: Table,
}

impl Outcome {
    pub fn violations(&self) -> usize {
        self.document.results.iter().map(ResultRecord::violations).sum()
    }

    pub fn checks(&self) -> usize {
        self.document.results.iter().map(|r| r.checks.len()).sum()
    }

    pub fn exit_code(&self) -> i32 {
        if self.violations() > 0 { 1 } else { 0 }
    }
}

/// Partial records produced by a command before digests and versions are
/// attached.
pub struct Draft {
    pub experiment: String,
    pub outputs: serde_json::Value,
    pub checks: Vec<Check>,
}

pub fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// SHA-256 of the compact JSON form of the configuration.
pub fn inputs_digest(config: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    let start = Instant::now();
    let (drafts, table) = commands::dispatch(config)?;
    let elapsed = start.elapsed().as_secs_f64();
    let digest = inputs_digest(config);
    let results = drafts
        .into_iter()
        .map(|d| ResultRecord {
            experiment: d.experiment,
            inputs_digest: digest.clone(),
            outputs: d.outputs,
            checks: d.checks,
            wall_time_s: config.experiment.timing.then_some(elapsed),
            version: VERSION.to_string(),
        })
        .collect();
    Ok(Outcome { document: Document { config: config.clone(), results, version: VERSION.to_string() }, table })
}

pub fn render_json(doc: &Document) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("document serializes");
    s.push('\n');
    s
}

pub fn render_csv(table: &Table) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header).map_err(|e| CliError::Io(e.to_string()))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

/// Writes `<command>.json` and/or `<command>.csv` under `dir`.
pub fn emit(outcome: &Outcome, dir: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    if outcome.document.results.is_empty() {
        return Err(CliError::Validation("nothing to emit".into()));
    }
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let name = outcome.document.config.command().name();
    let mut written = Vec::new();
    if matches!(format, Format::Json | Format::Both) {
        let path = dir.join(format!("{name}.json"));
        fs::write(&path, render_json(&outcome.document)).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    if matches!(format, Format::Csv | Format::Both) {
        let path = dir.join(format!("{name}.csv"));
        fs::write(&path, render_csv(&outcome.table)?).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Output directory: the config, then [`OUT_ENV`], then `polyosc-out`.
pub fn output_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .experiment
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("polyosc-out"))
}

/// Shortest round-trip representation of a float, used in CSV cells.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// `a;b;c` for list-valued CSV cells.
pub fn list<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}
