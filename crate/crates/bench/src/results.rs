//! Result records and their JSON / CSV renderings.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use lsm_core::readout::ReadoutKind;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result, Stage};

/// Wall-clock milliseconds per pipeline phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub encode_ms: f64,
    pub store_ms: f64,
    pub simulate_ms: f64,
    pub train_ms: f64,
    pub evaluate_ms: f64,
    pub total_ms: f64,
}

impl PhaseTimings {
    pub fn sum(all: &[PhaseTimings]) -> PhaseTimings {
        all.iter().fold(PhaseTimings::default(), |m, t| PhaseTimings {
            encode_ms: m.encode_ms + t.encode_ms,
            store_ms: m.store_ms + t.store_ms,
            simulate_ms: m.simulate_ms + t.simulate_ms,
            train_ms: m.train_ms + t.train_ms,
            evaluate_ms: m.evaluate_ms + t.evaluate_ms,
            total_ms: m.total_ms + t.total_ms,
        })
    }

    pub fn mean(all: &[PhaseTimings]) -> PhaseTimings {
        let s = Self::sum(all);
        let n = all.len().max(1) as f64;
        PhaseTimings {
            encode_ms: s.encode_ms / n,
            store_ms: s.store_ms / n,
            simulate_ms: s.simulate_ms / n,
            train_ms: s.train_ms / n,
            evaluate_ms: s.evaluate_ms / n,
            total_ms: s.total_ms / n,
        }
    }
}

/// Measures phases on the monotonic clock.
pub(crate) struct PhaseClock {
    start: Instant,
    lap: Instant,
}

impl PhaseClock {
    pub fn start() -> Self {
        let now = Instant::now();
        Self {
            start: now,
            lap: now,
        }
    }

    /// Milliseconds since the previous lap.
    pub fn lap(&mut self) -> f64 {
        let now = Instant::now();
        let d = now - self.lap;
        self.lap = now;
        ms(d)
    }

    pub fn total(&self) -> f64 {
        ms(self.start.elapsed())
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutScore {
    pub readout: ReadoutKind,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

/// One pass of the pipeline (one repeat, or one fold of one repeat).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub repeat: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    pub seed: u64,
    pub selection_size: usize,
    pub input_neurons: usize,
    pub train_records: usize,
    pub test_records: usize,
    pub input_spikes: u64,
    /// Bytes of the serialized train and test spike records.
    pub input_bytes: u64,
    pub scores: Vec<ReadoutScore>,
    pub timings: PhaseTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub readout: ReadoutKind,
    pub best_test: f64,
    pub mean_test: f64,
    pub std_test: f64,
    pub best_train: f64,
    pub mean_train: f64,
    /// Index into `runs` of the best test accuracy.
    pub best_run: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub runs: Vec<RunResult>,
    pub summary: Vec<AccuracySummary>,
    /// Mean input bytes over runs.
    pub input_bytes: u64,
    /// Mean phase timings over runs.
    pub timings: PhaseTimings,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl ExperimentResult {
    /// Summarizes `runs`. Under cross-validation only the fold-averaged
    /// runs (`fold == None`) count.
    pub fn from_runs(config: ExperimentConfig, runs: Vec<RunResult>) -> Self {
        let cv = runs.iter().any(|r| r.fold.is_some());
        let counted: Vec<usize> = (0..runs.len())
            .filter(|&i| !cv || runs[i].fold.is_none())
            .collect();
        let summary = config
            .readouts
            .iter()
            .map(|&readout| {
                let pick = |f: fn(&ReadoutScore) -> f64| -> Vec<f64> {
                    counted
                        .iter()
                        .map(|&i| {
                            let r = &runs[i];
                            r.scores
                                .iter()
                                .find(|s| s.readout == readout)
                                .map(f)
                                .unwrap_or(f64::NAN)
                        })
                        .collect()
                };
                let test = pick(|s| s.test_accuracy);
                let train = pick(|s| s.train_accuracy);
                let best_run = (0..test.len())
                    .fold(0, |b, i| if test[i] > test[b] { i } else { b });
                let (mean_test, std_test) = mean_std(&test);
                let (mean_train, _) = mean_std(&train);
                AccuracySummary {
                    readout,
                    best_test: test[best_run],
                    mean_test,
                    std_test,
                    best_train: train.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    mean_train,
                    best_run: counted[best_run],
                }
            })
            .collect();
        let input_bytes = (counted.iter().map(|&i| runs[i].input_bytes as f64).sum::<f64>()
            / counted.len().max(1) as f64)
            .round() as u64;
        let timings = PhaseTimings::mean(&counted.iter().map(|&i| runs[i].timings).collect::<Vec<_>>());
        Self {
            config,
            runs,
            summary,
            input_bytes,
            timings,
        }
    }

    pub fn summary_for(&self, readout: ReadoutKind) -> Option<&AccuracySummary> {
        self.summary.iter().find(|s| s.readout == readout)
    }

    /// Copy with every wall-clock field zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        let mut out = self.clone();
        out.timings = PhaseTimings::default();
        for r in &mut out.runs {
            r.timings = PhaseTimings::default();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BenchError::new(Stage::Output, e))
    }

    /// Flattened rows: one per readout and split, using the configured
    /// report mode.
    pub fn rows(&self) -> Vec<TableRow> {
        let mut rows = Vec::new();
        for s in &self.summary {
            let (train, test) = match self.config.report {
                crate::config::Report::Best => (s.best_train, s.best_test),
                crate::config::Report::Mean => (s.mean_train, s.mean_test),
            };
            for (split, accuracy) in [("train", train), ("test", test)] {
                rows.push(TableRow {
                    pattern: self.config.pattern.name().to_string(),
                    arch: self.config.arch.name().to_string(),
                    readout: s.readout.name().to_string(),
                    split: split.to_string(),
                    accuracy,
                    runtime_ms: self.timings.total_ms,
                    input_bytes: self.input_bytes,
                });
            }
        }
        rows
    }
}

/// One CSV line of a result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub pattern: String,
    pub arch: String,
    pub readout: String,
    pub split: String,
    pub accuracy: f64,
    pub runtime_ms: f64,
    pub input_bytes: u64,
}

pub const CSV_HEADER: [&str; 7] = [
    "pattern",
    "arch",
    "readout",
    "split",
    "accuracy",
    "runtime_ms",
    "input_bytes",
];

pub fn write_csv<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let io = |e: csv::Error| BenchError::new(Stage::Output, e);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| BenchError::new(Stage::Output, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl OutputFormat {
    /// Guesses from a file extension, defaulting to JSON.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::Json,
        }
    }
}

/// Anything that can be written as canonical JSON or as a flat table.
pub trait Emit {
    fn json(&self) -> String;
    fn table(&self) -> Vec<TableRow>;
}

impl Emit for ExperimentResult {
    fn json(&self) -> String {
        self.to_json()
    }

    fn table(&self) -> Vec<TableRow> {
        self.rows()
    }
}

pub fn render(result: &impl Emit, format: OutputFormat) -> Result<Vec<u8>> {
    match format {
        OutputFormat::Json => {
            let mut s = result.json();
            s.push('\n');
            Ok(s.into_bytes())
        }
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_csv(&result.table(), &mut buf)?;
            Ok(buf)
        }
    }
}

pub fn emit_results(result: &impl Emit, format: OutputFormat, path: &Path) -> Result<()> {
    let bytes = render(result, format)?;
    fs::write(path, bytes).map_err(|e| BenchError::new(Stage::Output, format!("{}: {e}", path.display())))
}
