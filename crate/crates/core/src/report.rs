//! Run configuration, report envelopes and their JSON/CSV serialization.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::adaptive::FitResult;
use crate::bench::{BlurKernel, BenchResult};
use crate::error::{Error, Result};
use crate::symmetry::{Aggregation, Regularizer, Scenario};
use crate::transforms::AffineParams;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Metric,
    Adapt,
    Bench,
    Restore,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Metric => "metric",
            Command::Adapt => "adapt",
            Command::Bench => "bench",
            Command::Restore => "restore",
        }
    }
}

/// Fully resolved settings of one invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub input: Vec<PathBuf>,
    pub regularizer: Regularizer,
    pub aggregation: Aggregation,
    pub scenario: Scenario,
    pub angles: usize,
    pub weights: Option<PathBuf>,
    pub suite: String,
    pub lambda: f64,
    pub kernel: BlurKernel,
    /// Iteration cap: descent steps for `adapt`, solver steps for `restore`.
    pub iters: Option<usize>,
    pub multi_start: bool,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            input: Vec::new(),
            regularizer: Regularizer::Tv,
            aggregation: Aggregation::default(),
            scenario: Scenario::DatasetStrict,
            angles: 32,
            weights: None,
            suite: "all".into(),
            lambda: 0.05,
            kernel: BlurKernel::Delta,
            iters: None,
            multi_start: false,
            jobs: 1,
            out: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::Usage("--jobs must be at least 1".into()));
        }
        if self.iters == Some(0) {
            return Err(Error::Usage("--iters must be at least 1".into()));
        }
        match self.command {
            Command::Metric | Command::Adapt | Command::Restore => {
                if self.input.is_empty() {
                    return Err(Error::Usage(format!("{} needs --input", self.command.name())));
                }
                for p in &self.input {
                    if !p.exists() {
                        return Err(Error::Usage(format!("input {} does not exist", p.display())));
                    }
                }
            }
            Command::Bench => {}
        }
        if matches!(self.command, Command::Metric | Command::Adapt) && self.angles < 2 {
            return Err(Error::Usage(format!("--angles must be at least 2, got {}", self.angles)));
        }
        if let Some(w) = &self.weights {
            if !w.exists() {
                return Err(Error::Usage(format!("weights file {} does not exist", w.display())));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Usage(format!("--lambda must be non-negative, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// One row of a weights file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub file: String,
    pub w: AffineParams,
    pub objective_initial: f64,
    pub objective_final: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl WeightEntry {
    pub fn from_fit(file: impl Into<String>, fit: &FitResult) -> Self {
        WeightEntry {
            file: file.into(),
            w: fit.w,
            objective_initial: fit.objective_initial,
            objective_final: fit.objective_final,
            iterations: fit.iterations,
            converged: fit.converged,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope<P> {
    pub tool_version: String,
    pub created_at: String,
    pub config_echo: RunConfig,
    pub payload: P,
}

impl<P: Serialize> ReportEnvelope<P> {
    pub fn new(config: &RunConfig, payload: P) -> Self {
        let created_at = OffsetDateTime::now_utc()
            .format(&Rfc3339)
            .unwrap_or_else(|_| "unknown".into());
        ReportEnvelope {
            tool_version: TOOL_VERSION.into(),
            created_at,
            config_echo: config.clone(),
            payload,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Serialized payload of a report, the part compared for determinism.
pub fn payload_json<P: Serialize>(payload: &P) -> Result<String> {
    Ok(serde_json::to_string(payload)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads weight entries from either a bare array or a report envelope whose
/// payload is that array.
pub fn read_weights(path: &Path) -> Result<Vec<WeightEntry>> {
    let v: Value = read_json(path)?;
    let array = match v {
        Value::Object(mut o) => o
            .remove("payload")
            .ok_or_else(|| Error::Usage(format!("{}: no payload in report", path.display())))?,
        other => other,
    };
    Ok(serde_json::from_value(array)?)
}

/// One CSV row per measured entry.
pub fn bench_csv(results: &[BenchResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bench", "entry", "measured", "rule", "bound_or_reference", "pass", "bench_pass"])?;
    for r in results {
        let rules = r.rules();
        for (i, (m, b)) in r.measured.iter().zip(&r.bound_or_reference).enumerate() {
            let (rule, ok) = match rules.get(i) {
                Some(rule) => (rule.symbol(), rule.holds(*m, *b)),
                None => ("?", false),
            };
            w.write_record([
                r.name.clone(),
                i.to_string(),
                format!("{m:e}"),
                rule.to_string(),
                format!("{b:e}"),
                ok.to_string(),
                r.pass.to_string(),
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(format!("csv output: {e}")))
}

/// Writes `text` to `out`, or to standard output when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}
