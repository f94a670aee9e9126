//! Loaded samples, frame- or event-based, behind one encoding interface.

use lsm_core::datasets::{self, EventDataset, FrameDataset};
use lsm_core::encoding::{self, EncodeConfig, SpikeRecord};
use lsm_core::{GridShape, PixelSelection};
use rayon::prelude::*;

use crate::config::{DatasetSpec, EncodeSettings};
use crate::error::{Result, Stage, StageExt};

#[derive(Debug, Clone)]
pub enum Samples {
    Frames(FrameDataset),
    Events(EventDataset),
}

impl Samples {
    pub fn shape(&self) -> GridShape {
        match self {
            Self::Frames(d) => d.shape,
            Self::Events(d) => d.shape,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Frames(d) => d.len(),
            Self::Events(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> &[u16] {
        match self {
            Self::Frames(d) => &d.labels,
            Self::Events(d) => &d.labels,
        }
    }

    pub fn is_events(&self) -> bool {
        matches!(self, Self::Events(_))
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        match self {
            Self::Frames(d) => Self::Frames(d.subset(indices)),
            Self::Events(d) => Self::Events(d.subset(indices)),
        }
    }

    pub fn concat(self, other: Self) -> Self {
        match (self, other) {
            (Self::Frames(a), Self::Frames(b)) => Self::Frames(a.concat(b)),
            (Self::Events(a), Self::Events(b)) => Self::Events(a.concat(b)),
            _ => panic!("cannot join frame and event samples"),
        }
    }

    /// Input-layer size for a selection: one neuron per selected pixel, two
    /// (ON and OFF) for event data.
    pub fn n_inputs(&self, selection: &PixelSelection) -> usize {
        if self.is_events() {
            2 * selection.len()
        } else {
            selection.len()
        }
    }

    /// Produces `n_records` spike records; record `i` comes from sample
    /// `i % len()`.
    pub fn encode(
        &self,
        selection: &PixelSelection,
        settings: &EncodeSettings,
        n_records: usize,
        seed: u64,
    ) -> Result<Vec<SpikeRecord>> {
        match self {
            Self::Frames(d) => {
                let cfg = EncodeConfig {
                    sim_time_ms: settings.sim_time_ms,
                    n_records,
                    max_rate_hz: settings.max_rate_hz,
                    dt_ms: settings.dt_ms,
                    seed,
                };
                encoding::encode_frames(&d.images, &d.labels, selection, &cfg).stage(Stage::Encode)
            }
            Self::Events(d) => {
                if d.is_empty() {
                    return Err(encoding::EncodeError::NoImages).stage(Stage::Encode);
                }
                let t = settings.sim_time_ms;
                (0..n_records)
                    .into_par_iter()
                    .map(|i| {
                        let k = i % d.len();
                        let kept = encoding::filter_events(&d.samples[k], selection, t);
                        encoding::reindex_events(&kept, selection, t, d.labels[k])
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .stage(Stage::Encode)
            }
        }
    }
}

/// Training and test samples of a dataset spec. Image directories without a
/// test directory load everything as training data.
pub fn load(spec: &DatasetSpec) -> Result<(Samples, Samples)> {
    match spec {
        DatasetSpec::Mnist {
            train_images,
            train_labels,
            test_images,
            test_labels,
            train_limit,
            test_limit,
        } => {
            let train = datasets::load_idx(train_images, train_labels, *train_limit).stage(Stage::Load)?;
            let test = datasets::load_idx(test_images, test_labels, *test_limit).stage(Stage::Load)?;
            Ok((Samples::Frames(train), Samples::Frames(test)))
        }
        DatasetSpec::Nmnist {
            train_dir,
            test_dir,
            train_limit,
            test_limit,
        } => {
            let train = datasets::load_nmnist_dir(train_dir, *train_limit).stage(Stage::Load)?;
            let test = datasets::load_nmnist_dir(test_dir, *test_limit).stage(Stage::Load)?;
            Ok((Samples::Events(train), Samples::Events(test)))
        }
        DatasetSpec::ImageDir {
            dir,
            test_dir,
            height,
            width,
            crop,
        } => {
            let shape = GridShape::new(*height, *width).stage(Stage::Config)?;
            let train = datasets::load_image_dir(dir, shape, *crop).stage(Stage::Load)?;
            let test = match test_dir {
                Some(t) => datasets::load_image_dir(t, shape, *crop).stage(Stage::Load)?,
                None => FrameDataset {
                    shape,
                    images: Vec::new(),
                    labels: Vec::new(),
                },
            };
            Ok((Samples::Frames(train), Samples::Frames(test)))
        }
    }
}
