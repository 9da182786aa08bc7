//! Run records, seed ranges and output files.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use hedgeron::quantum_sim::QueryLedger;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRange {
    pub first: u64,
    pub last: u64,
}

impl SeedRange {
    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        self.first..=self.last
    }

    pub fn is_single(&self) -> bool {
        self.first == self.last
    }
}

impl FromStr for SeedRange {
    type Err = String;

    /// `7`, `1..100` or `1..=100`; both forms are inclusive.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parse = |x: &str| x.trim().parse::<u64>().map_err(|_| format!("bad seed '{x}'"));
        let (first, last) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.strip_prefix('=').unwrap_or(b))?),
            None => {
                let v = parse(s)?;
                (v, v)
            }
        };
        if last < first {
            return Err(format!("empty seed range {s}"));
        }
        Ok(SeedRange { first, last })
    }
}

/// What one seed of a command produced.
pub struct Outcome {
    pub payload: Value,
    pub ledger: Option<QueryLedger>,
    /// Scalar aggregated over seed ranges.
    pub headline: Option<(&'static str, f64)>,
    /// Extra files as `(file name, contents)`.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn new(payload: impl Serialize) -> Result<Self> {
        Ok(Outcome { payload: serde_json::to_value(payload)?, ledger: None, headline: None, files: Vec::new() })
    }

    pub fn ledger(mut self, ledger: QueryLedger) -> Self {
        self.ledger = Some(ledger);
        self
    }

    pub fn headline(mut self, name: &'static str, value: f64) -> Self {
        self.headline = Some((name, value));
        self
    }

    pub fn file(mut self, name: String, contents: String) -> Self {
        self.files.push((name, contents));
        self
    }
}

/// Deterministic part of a run: replaying `config` with `seed` reproduces it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeFile {
    pub command: String,
    pub seed: u64,
    pub payload: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ledger: Option<QueryLedger>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub version: String,
    pub generator: String,
    pub seed: u64,
    pub config: Value,
    pub payload: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ledger: Option<QueryLedger>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub command: String,
    pub seeds: Vec<u64>,
    pub metric: Option<String>,
    pub values: Vec<f64>,
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
}

impl Summary {
    pub fn new(command: &str, seeds: Vec<u64>, metric: Option<&str>, values: Vec<f64>) -> Self {
        let (mean, stddev) = if values.is_empty() {
            (None, None)
        } else {
            (Some(hedgeron::stats::mean(&values)), Some(hedgeron::stats::std_dev(&values)))
        };
        Summary { command: command.to_string(), seeds, metric: metric.map(str::to_string), values, mean, stddev }
    }
}

pub fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

pub fn write_text(path: &Path, s: &str) -> Result<()> {
    std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.to_path_buf())
}

/// Reads the `--config` file into `T`, or `T::default()` without one.
pub fn load_config<T>(path: Option<&Path>) -> Result<T>
where
    T: for<'de> Deserialize<'de> + Default,
{
    match path {
        None => Ok(T::default()),
        Some(p) => read_json(p),
    }
}

/// Like [`load_config`] for commands with required fields.
pub fn load_required<T>(path: Option<&Path>, command: &str) -> Result<T>
where
    T: for<'de> Deserialize<'de>,
{
    match path {
        None => bail!("{command} needs --config"),
        Some(p) => read_json(p),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(p: &Path) -> Result<T> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    let v = serde_json::from_str(&text).with_context(|| format!("config {}", p.display()))?;
    Ok(v)
}

/// Prints a line, ignoring a closed stdout (e.g. piped into `head`).
pub fn emit(s: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{s}");
}
