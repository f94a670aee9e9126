use std::path::Path;

use lsm_bench::config::{DatasetSpec, EncodeSettings, ExperimentConfig};
use lsm_core::datasets::{self, FrameDataset};
use lsm_core::liquid::LiquidConfig;
use lsm_core::readout::ReadoutHyper;
use lsm_core::GridShape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Noisy 12x12 images of three classes: a horizontal bar, a vertical bar
/// and a diagonal.
pub fn bars(n: usize, seed: u64) -> FrameDataset {
    let shape = GridShape::new(12, 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = (i % 3) as u16;
        let offset = rng.gen_range(3..9);
        let img = (0..shape.pixels())
            .map(|p| {
                let (r, c) = (p / 12, p % 12);
                let on = match class {
                    0 => r.abs_diff(offset) <= 1,
                    1 => c.abs_diff(offset) <= 1,
                    _ => r.abs_diff(c) <= 1,
                };
                let noise: f32 = rng.gen_range(0.0..0.15);
                if on {
                    1.0 - noise
                } else {
                    noise
                }
            })
            .collect();
        images.push(img);
        labels.push(class);
    }
    FrameDataset { shape, images, labels }
}

/// Writes a train/test IDX pair under `dir` and returns the dataset spec.
pub fn write_bars(dir: &Path, n_train: usize, n_test: usize) -> DatasetSpec {
    let paths = [
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    ]
    .map(|p| dir.join(p));
    datasets::write_idx(&bars(n_train, 1), &paths[0], &paths[1]).unwrap();
    datasets::write_idx(&bars(n_test, 2), &paths[2], &paths[3]).unwrap();
    let [train_images, train_labels, test_images, test_labels] = paths;
    DatasetSpec::Mnist {
        train_images,
        train_labels,
        test_images,
        test_labels,
        train_limit: None,
        test_limit: None,
    }
}

/// A configuration small enough to run in well under a second.
pub fn small_config(dataset: DatasetSpec) -> ExperimentConfig {
    ExperimentConfig {
        dataset,
        liquid: LiquidConfig::mnist(100),
        encode: EncodeSettings {
            sim_time_ms: 50.0,
            ..EncodeSettings::default()
        },
        readout: ReadoutHyper {
            epochs: 30,
            ..ReadoutHyper::default()
        },
        ..ExperimentConfig::default()
    }
}
