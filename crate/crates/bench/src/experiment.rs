//! Repeats, cross-validation and pattern comparisons on top of
//! [`run_once`](crate::pipeline::run_once).

use lsm_core::seed::{self, stream};
use lsm_core::PatternKind;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::data::{self, Samples};
use crate::error::{BenchError, Result, Stage, StageExt};
use crate::pipeline::{self, RunSpec};
use crate::results::{Emit, ExperimentResult, PhaseTimings, RunResult, TableRow};

/// Loads the dataset and runs every repeat (and every fold, under
/// cross-validation) of `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    with_threads(cfg.threads, || {
        let (train, test) = data::load(&cfg.dataset)?;
        run_loaded(cfg, &train, &test)
    })
}

/// Same as [`run_experiment`] on samples that are already in memory.
pub fn run_loaded(cfg: &ExperimentConfig, train: &Samples, test: &Samples) -> Result<ExperimentResult> {
    cfg.validate()?;
    let selection = pipeline::selection(cfg, train)?;
    let mut runs = Vec::new();
    if cfg.cv_folds == 0 {
        for repeat in 0..cfg.repeats {
            runs.push(pipeline::run_once(
                cfg,
                RunSpec {
                    train,
                    test,
                    selection: &selection,
                    repeat,
                    fold: None,
                    train_records: cfg.encode.train_records,
                    test_records: cfg.encode.test_records,
                },
            )?);
        }
    } else {
        let pool = if test.is_empty() {
            train.clone()
        } else {
            train.clone().concat(test.clone())
        };
        let folds = fold_indices(pool.len(), cfg.cv_folds, cfg.seed)?;
        for repeat in 0..cfg.repeats {
            for (f, held_out) in folds.iter().enumerate() {
                let rest: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|&(g, _)| g != f)
                    .flat_map(|(_, idx)| idx.iter().copied())
                    .collect();
                let fold_train = pool.subset(&rest);
                let fold_test = pool.subset(held_out);
                runs.push(pipeline::run_once(
                    cfg,
                    RunSpec {
                        train: &fold_train,
                        test: &fold_test,
                        selection: &selection,
                        repeat,
                        fold: Some(f),
                        train_records: cfg.encode.train_records,
                        test_records: None,
                    },
                )?);
            }
        }
        runs = average_folds(runs, cfg.cv_folds);
    }
    Ok(ExperimentResult::from_runs(cfg.clone(), runs))
}

/// Seeded shuffle of `0..n` cut into `k` contiguous folds; the first
/// `n % k` folds hold one extra sample.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(BenchError::config("cross-validation needs at least 2 folds"));
    }
    if k > n {
        return Err(BenchError::config(format!("{k} folds but only {n} samples")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, stream::FOLDS, 0)));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[at..at + len].to_vec());
        at += len;
    }
    Ok(folds)
}

/// Keeps the per-fold runs and appends, for each repeat, one run with
/// `fold = None` holding the fold-averaged scores.
fn average_folds(runs: Vec<RunResult>, k: usize) -> Vec<RunResult> {
    let mut out = Vec::with_capacity(runs.len() / k * (k + 1));
    for chunk in runs.chunks(k) {
        let mut avg = chunk[0].clone();
        avg.fold = None;
        let n = chunk.len() as f64;
        for (i, s) in avg.scores.iter_mut().enumerate() {
            s.train_accuracy = chunk.iter().map(|r| r.scores[i].train_accuracy).sum::<f64>() / n;
            s.test_accuracy = chunk.iter().map(|r| r.scores[i].test_accuracy).sum::<f64>() / n;
        }
        avg.train_records = chunk.iter().map(|r| r.train_records).sum();
        avg.test_records = chunk.iter().map(|r| r.test_records).sum();
        avg.input_spikes = chunk.iter().map(|r| r.input_spikes).sum();
        avg.input_bytes = chunk.iter().map(|r| r.input_bytes).sum();
        let timings: Vec<_> = chunk.iter().map(|r| r.timings).collect();
        avg.timings = PhaseTimings::sum(&timings);
        out.extend(chunk.iter().cloned());
        out.push(avg);
    }
    out
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if threads == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .stage(Stage::Config)?
        .install(f)
}

/// One pattern's line in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSummary {
    pub pattern: PatternKind,
    pub selection_size: usize,
    pub input_bytes: u64,
    pub runtime_ms: f64,
    /// Fullscale bytes over this pattern's bytes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub storage_ratio: Option<f64>,
    /// This pattern's runtime over the fullscale runtime.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub patterns: Vec<PatternSummary>,
    pub results: Vec<ExperimentResult>,
}

impl Comparison {
    pub fn result(&self, pattern: &str) -> Option<&ExperimentResult> {
        self.results.iter().find(|r| r.config.pattern.name() == pattern)
    }

    pub fn summary(&self, pattern: &str) -> Option<&PatternSummary> {
        self.patterns.iter().find(|p| p.pattern.name() == pattern)
    }
}

impl Emit for Comparison {
    fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }

    fn table(&self) -> Vec<TableRow> {
        self.results.iter().flat_map(|r| r.rows()).collect()
    }
}

/// Runs `base` once per pattern on a single load of the dataset. Ratios are
/// filled in when fullscale is among the patterns.
pub fn compare_patterns(base: &ExperimentConfig, patterns: &[PatternKind]) -> Result<Comparison> {
    base.validate()?;
    with_threads(base.threads, || {
        let (train, test) = data::load(&base.dataset)?;
        compare_loaded(base, patterns, &train, &test)
    })
}

pub fn compare_loaded(
    base: &ExperimentConfig,
    patterns: &[PatternKind],
    train: &Samples,
    test: &Samples,
) -> Result<Comparison> {
    let mut results = Vec::with_capacity(patterns.len());
    for &pattern in patterns {
        let cfg = ExperimentConfig {
            pattern,
            ..base.clone()
        };
        results.push(run_loaded(&cfg, train, test)?);
    }
    let full = results
        .iter()
        .find(|r| r.config.pattern == PatternKind::Fullscale)
        .map(|r| (r.input_bytes as f64, r.timings.total_ms));
    let patterns = results
        .iter()
        .map(|r| PatternSummary {
            pattern: r.config.pattern,
            selection_size: r.runs.first().map_or(0, |x| x.selection_size),
            input_bytes: r.input_bytes,
            runtime_ms: r.timings.total_ms,
            storage_ratio: full.map(|(b, _)| b / r.input_bytes.max(1) as f64),
            runtime_ratio: full.map(|(_, t)| r.timings.total_ms / t),
        })
        .collect();
    Ok(Comparison { patterns, results })
}
