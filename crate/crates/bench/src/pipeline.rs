//! One pass of the benchmark: select, encode, store, simulate, train,
//! evaluate.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use lsm_core::encoding::{self, SpikeRecord};
use lsm_core::liquid::{self, LiquidConfig, StateVector};
use lsm_core::readout::{self, ReadoutHyper};
use lsm_core::seed::{self, stream};
use lsm_core::{PixelSelection, Scalar};

use crate::config::{ExperimentConfig, Precision};
use crate::data::Samples;
use crate::error::{BenchError, Result, Stage, StageExt};
use crate::results::{PhaseClock, PhaseTimings, ReadoutScore, RunResult};

/// Seed of repeat `r` of an experiment.
pub fn run_seed(cfg: &ExperimentConfig, repeat: usize) -> u64 {
    seed::derive(cfg.seed, stream::REPEAT, repeat as u64)
}

/// Pixel selection for the configured pattern. The scanline draw depends on
/// the experiment seed only, so every repeat sees the same lines.
pub fn selection(cfg: &ExperimentConfig, samples: &Samples) -> Result<PixelSelection> {
    let shape = samples.shape();
    cfg.validate_for_shape(shape)?;
    cfg.pattern
        .select(shape, cfg.seed)
        .stage(Stage::Pattern)
}

/// Where a run's inputs come from and how it is labelled.
#[derive(Debug, Clone, Copy)]
pub struct RunSpec<'a> {
    pub train: &'a Samples,
    pub test: &'a Samples,
    pub selection: &'a PixelSelection,
    pub repeat: usize,
    pub fold: Option<usize>,
    /// Training records; `None` means one per training sample.
    pub train_records: Option<usize>,
    /// Test records; `None` means one per test sample.
    pub test_records: Option<usize>,
}

/// Runs one pass with the configured precision.
pub fn run_once(cfg: &ExperimentConfig, spec: RunSpec<'_>) -> Result<RunResult> {
    match cfg.precision {
        Precision::F32 => run_typed::<f32>(cfg, spec),
        Precision::F64 => run_typed::<f64>(cfg, spec),
    }
}

pub fn run_typed<S: Scalar>(cfg: &ExperimentConfig, spec: RunSpec<'_>) -> Result<RunResult> {
    let rs = run_seed(cfg, spec.repeat);
    // Folds of the same repeat share the liquid but not the encoder draw.
    let fold_index = spec.fold.map_or(0, |f| f as u64 + 1);
    let es = seed::derive(cfg.encode.seed.unwrap_or(cfg.seed), stream::ENCODE, spec.repeat as u64);
    let n_train = spec.train_records.unwrap_or(spec.train.len());
    let n_test = spec.test_records.unwrap_or(spec.test.len());
    if spec.train.is_empty() || spec.test.is_empty() {
        return Err(BenchError::config("both splits need at least one sample"));
    }
    let mut clock = PhaseClock::start();

    let train_rec = spec
        .train
        .encode(spec.selection, &cfg.encode, n_train, seed::derive(es, 2 * fold_index, 0))?;
    let test_rec = spec
        .test
        .encode(spec.selection, &cfg.encode, n_test, seed::derive(es, 2 * fold_index + 1, 0))?;
    let encode_ms = clock.lap();

    let input_bytes = store(cfg, spec, &train_rec, &test_rec)?;
    let store_ms = clock.lap();

    let n_inputs = spec.train.n_inputs(spec.selection);
    let liquid_cfg = LiquidConfig {
        seed: rs,
        ..cfg.liquid
    };
    let params = cfg.neuron.cast::<S>();
    let out = liquid::run_reservoir(
        cfg.arch,
        &liquid_cfg,
        params,
        n_inputs,
        &train_rec,
        &test_rec,
        cfg.normalization,
    )
    .stage(Stage::Simulate)?;
    let simulate_ms = clock.lap();

    if let Some(dir) = &cfg.state_dump_dir {
        if spec.repeat == 0 && spec.fold.unwrap_or(0) == 0 {
            dump_split(dir, "train.csv", &out.train, &train_rec).stage(Stage::Output)?;
            dump_split(dir, "test.csv", &out.test, &test_rec).stage(Stage::Output)?;
        }
    }

    let train_x: Vec<Vec<S>> = out.train.into_iter().map(|s| s.normalized).collect();
    let test_x: Vec<Vec<S>> = out.test.into_iter().map(|s| s.normalized).collect();
    let train_y: Vec<u16> = train_rec.iter().map(|r| r.label).collect();
    let test_y: Vec<u16> = test_rec.iter().map(|r| r.label).collect();
    let hyper = ReadoutHyper {
        seed: rs,
        ..cfg.readout
    };
    let models = cfg
        .readouts
        .iter()
        .map(|&k| readout::train_readout(k, &train_x, &train_y, &hyper))
        .collect::<Result<Vec<_>, _>>()
        .stage(Stage::Train)?;
    let train_ms = clock.lap();

    let mut scores = Vec::with_capacity(models.len());
    for m in &models {
        scores.push(ReadoutScore {
            readout: m.kind,
            train_accuracy: readout::evaluate(m, &train_x, &train_y).stage(Stage::Evaluate)?,
            test_accuracy: readout::evaluate(m, &test_x, &test_y).stage(Stage::Evaluate)?,
        });
    }
    let evaluate_ms = clock.lap();

    let input_spikes = train_rec.iter().chain(&test_rec).map(|r| r.len() as u64).sum();
    Ok(RunResult {
        repeat: spec.repeat,
        fold: spec.fold,
        seed: rs,
        selection_size: spec.selection.len(),
        input_neurons: n_inputs,
        train_records: train_rec.len(),
        test_records: test_rec.len(),
        input_spikes,
        input_bytes,
        scores,
        timings: PhaseTimings {
            encode_ms,
            store_ms,
            simulate_ms,
            train_ms,
            evaluate_ms,
            total_ms: clock.total(),
        },
    })
}

/// Writes both splits to disk and returns the total file size.
fn store(
    cfg: &ExperimentConfig,
    spec: RunSpec<'_>,
    train: &[SpikeRecord],
    test: &[SpikeRecord],
) -> Result<u64> {
    let tmp;
    let dir: PathBuf = match &cfg.spike_dir {
        Some(d) => {
            fs::create_dir_all(d).stage(Stage::Store)?;
            d.clone()
        }
        None => {
            tmp = tempfile::tempdir().stage(Stage::Store)?;
            tmp.path().to_path_buf()
        }
    };
    let stem = match spec.fold {
        Some(f) => format!("r{}-f{}", spec.repeat, f),
        None => format!("r{}", spec.repeat),
    };
    let a = encoding::write_records(train, dir.join(format!("{stem}-train.lsms"))).stage(Stage::Store)?;
    let b = encoding::write_records(test, dir.join(format!("{stem}-test.lsms"))).stage(Stage::Store)?;
    Ok(a + b)
}

fn dump_split<S: Scalar>(
    dir: &Path,
    name: &str,
    states: &[StateVector<S>],
    records: &[SpikeRecord],
) -> std::result::Result<(), Box<dyn std::error::Error + Send + Sync>> {
    fs::create_dir_all(dir)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(File::create(dir.join(name))?));
    for (s, r) in states.iter().zip(records) {
        let mut row = Vec::with_capacity(s.normalized.len() + 1);
        row.push(r.label.to_string());
        row.extend(s.normalized.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
