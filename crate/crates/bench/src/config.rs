//! Experiment manifests. A config is one JSON document; command-line flags
//! override individual fields after loading.

use std::fs;
use std::path::{Path, PathBuf};

use lsm_core::datasets::CropSpec;
use lsm_core::liquid::{Architecture, LiquidConfig, NeuronParams, Normalization};
use lsm_core::readout::{ReadoutHyper, ReadoutKind};
use lsm_core::{GridShape, PatternKind};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result, Stage, StageExt};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSpec {
    /// IDX image/label pairs (optionally gzipped).
    Mnist {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
    },
    /// N-MNIST style directories of `<class>/<sample>.bin`.
    Nmnist {
        train_dir: PathBuf,
        test_dir: PathBuf,
        #[serde(default)]
        train_limit: Option<usize>,
        #[serde(default)]
        test_limit: Option<usize>,
    },
    /// PGM files named `<class>_<name>.pgm`, cropped and resized.
    ImageDir {
        dir: PathBuf,
        #[serde(default)]
        test_dir: Option<PathBuf>,
        height: usize,
        width: usize,
        #[serde(default)]
        crop: CropSpec,
    },
}

impl DatasetSpec {
    /// The bundled 5000-sample MNIST subset under `dir`.
    pub fn mnist_dir(dir: impl AsRef<Path>, train_limit: usize, test_limit: usize) -> Self {
        let d = dir.as_ref();
        Self::Mnist {
            train_images: d.join("train-images-idx3-ubyte.gz"),
            train_labels: d.join("train-labels-idx1-ubyte.gz"),
            test_images: d.join("t10k-images-idx3-ubyte.gz"),
            test_labels: d.join("t10k-labels-idx1-ubyte.gz"),
            train_limit: Some(train_limit),
            test_limit: Some(test_limit),
        }
    }

    pub fn is_events(&self) -> bool {
        matches!(self, Self::Nmnist { .. })
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match self {
            Self::Mnist {
                train_images,
                train_labels,
                test_images,
                test_labels,
                ..
            } => {
                fix(train_images);
                fix(train_labels);
                fix(test_images);
                fix(test_labels);
            }
            Self::Nmnist {
                train_dir, test_dir, ..
            } => {
                fix(train_dir);
                fix(test_dir);
            }
            Self::ImageDir { dir, test_dir, .. } => {
                fix(dir);
                if let Some(t) = test_dir {
                    fix(t);
                }
            }
        }
    }
}

/// Encoder settings shared by all runs; record counts and seeds are filled
/// in per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodeSettings {
    pub sim_time_ms: f64,
    pub max_rate_hz: f64,
    pub dt_ms: f64,
    /// Training records to generate (images repeat cyclically). Defaults to
    /// the number of training samples.
    pub train_records: Option<usize>,
    /// Test records to generate. Defaults to the number of test samples.
    pub test_records: Option<usize>,
    /// Base seed for rate coding; defaults to the experiment seed.
    pub seed: Option<u64>,
}

impl Default for EncodeSettings {
    fn default() -> Self {
        Self {
            sim_time_ms: 100.0,
            max_rate_hz: 250.0,
            dt_ms: 1.0,
            train_records: None,
            test_records: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Report {
    #[default]
    Best,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub pattern: PatternKind,
    pub arch: Architecture,
    /// Liquid hyper-parameters; its `seed` is replaced by the per-run seed.
    pub liquid: LiquidConfig,
    pub neuron: NeuronParams<f64>,
    pub encode: EncodeSettings,
    pub readouts: Vec<ReadoutKind>,
    /// Readout hyper-parameters; its `seed` is replaced by the per-run seed.
    pub readout: ReadoutHyper,
    pub normalization: Normalization,
    pub repeats: usize,
    pub report: Report,
    /// `0` for the plain train/test split, otherwise k-fold cross-validation.
    pub cv_folds: usize,
    pub seed: u64,
    pub precision: Precision,
    /// Worker threads; `0` uses every core.
    pub threads: usize,
    /// Where spike files are written for storage accounting; a temporary
    /// directory when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spike_dir: Option<PathBuf>,
    /// Write state vectors of the first run as `train.csv` / `test.csv` here.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_dump_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::mnist_dir("data/mnist-5k", 2000, 1000),
            pattern: PatternKind::FULLSCALE,
            arch: Architecture::Rc1,
            liquid: LiquidConfig::mnist(1000),
            neuron: NeuronParams::default(),
            encode: EncodeSettings::default(),
            readouts: vec![ReadoutKind::Sgd],
            readout: ReadoutHyper::default(),
            normalization: Normalization::Global,
            repeats: 1,
            report: Report::Best,
            cv_folds: 0,
            seed: 0,
            precision: Precision::F64,
            threads: 0,
            spike_dir: None,
            state_dump_dir: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses a JSON manifest; relative dataset paths are taken relative to
    /// the manifest's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| BenchError::new(Stage::Config, format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| BenchError::new(Stage::Config, format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.dataset.resolve(base);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that does not need the data on disk.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(BenchError::config(m));
        if self.repeats == 0 {
            return fail("repeats must be at least 1".into());
        }
        if self.readouts.is_empty() {
            return fail("at least one readout is required".into());
        }
        if self.cv_folds == 1 {
            return fail("cv_folds must be 0 (plain split) or at least 2".into());
        }
        let liquids = self.arch.liquids();
        if self.liquid.n_neurons % liquids != 0 {
            return fail(format!(
                "{} neurons cannot be split into {liquids} liquids",
                self.liquid.n_neurons
            ));
        }
        self.liquid.validate().stage(Stage::Config)?;
        self.neuron.validate().stage(Stage::Config)?;
        lsm_core::EncodeConfig {
            sim_time_ms: self.encode.sim_time_ms,
            n_records: 1,
            max_rate_hz: self.encode.max_rate_hz,
            dt_ms: self.encode.dt_ms,
            seed: 0,
        }
        .validate()
        .stage(Stage::Config)?;
        if self.encode.train_records == Some(0) || self.encode.test_records == Some(0) {
            return fail("record counts must be positive".into());
        }
        if (self.encode.dt_ms - self.neuron.dt_ms).abs() > 1e-12 {
            return fail("encoder and neuron dt_ms must match".into());
        }
        if let DatasetSpec::ImageDir { height, width, .. } = &self.dataset {
            GridShape::new(*height, *width).stage(Stage::Config)?;
        }
        match &self.dataset {
            DatasetSpec::Mnist { test_limit: Some(0), .. }
            | DatasetSpec::Nmnist { test_limit: Some(0), .. }
                if self.cv_folds == 0 =>
            {
                fail("test split has zero samples".into())
            }
            DatasetSpec::ImageDir { test_dir: None, .. } if self.cv_folds == 0 => {
                fail("image-dir dataset without test_dir needs cv_folds >= 2".into())
            }
            _ => Ok(()),
        }
    }

    /// Pattern geometry check against the dataset grid.
    pub fn validate_for_shape(&self, shape: GridShape) -> Result<()> {
        self.pattern.validate(shape).stage(Stage::Config)
    }
}
