//! Building blocks for liquid state machine experiments on reduced inputs.
//!
//! The pipeline runs left to right through the modules:
//!
//! * [`patterns`] picks which pixels of an image grid become input neurons
//!   (fullscale, scanline, chessboard, patch).
//! * [`encoding`] turns frames into rate-coded spike records, filters event
//!   streams down to a selection, and serializes records with exact byte
//!   accounting.
//! * [`datasets`] parses MNIST IDX files, N-MNIST AER event files and PGM
//!   image directories.
//! * [`liquid`] builds random excitatory/inhibitory LIF liquids and turns
//!   spike records into normalized state vectors.
//! * [`readout`] trains softmax and linear SVM classifiers on state vectors.
//!
//! Numeric code in [`liquid`] and [`readout`] is generic over [`Scalar`]
//! (`f32` or `f64`); the aliases below pin the common instantiations.

pub mod datasets;
pub mod encoding;
pub mod liquid;
pub mod num;
pub mod patterns;
pub mod readout;
pub mod seed;

pub use num::Scalar;

pub use datasets::{EventDataset, FrameDataset};
pub use encoding::{EncodeConfig, EventStream, SpikeRecord};
pub use patterns::{GridShape, PatternKind, PixelSelection};

/// Liquid topology with double-precision weights.
pub type Topology = liquid::LiquidTopology<f64>;
/// Liquid topology with single-precision weights.
pub type Topology32 = liquid::LiquidTopology<f32>;
/// LIF parameters in double precision.
pub type NeuronParams = liquid::NeuronParams<f64>;
/// LIF parameters in single precision.
pub type NeuronParams32 = liquid::NeuronParams<f32>;
/// Normalized state vector in double precision.
pub type StateVector = liquid::StateVector<f64>;
/// Normalized state vector in single precision.
pub type StateVector32 = liquid::StateVector<f32>;
/// Readout classifier in double precision.
pub type ReadoutModel = readout::ReadoutModel<f64>;
/// Readout classifier in single precision.
pub type ReadoutModel32 = readout::ReadoutModel<f32>;
