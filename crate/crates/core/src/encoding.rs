//! Spike encoding of frames and event streams, and the spike-record file
//! format used to account for input storage.
//!
//! Frames are rate coded: every selected pixel with intensity `a` fires as an
//! independent Bernoulli process with per-step probability
//! `a * max_rate_hz * dt_ms / 1000`. Event streams are already spikes; they
//! are only restricted to the selected pixels and the simulation window.
//!
//! In both cases input neurons are numbered densely by their rank inside the
//! selection, so the input layer shrinks with the pattern.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patterns::{PixelSelection, NOT_SELECTED};
use crate::seed;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("no images to encode")]
    NoImages,
    #[error("{images} images but {labels} labels")]
    LabelCount { images: usize, labels: usize },
    #[error("image {image} has {got} pixels, selection grid has {expected}")]
    ImageSize {
        image: usize,
        got: usize,
        expected: usize,
    },
    #[error("image {image} pixel {pixel} has intensity {value} outside [0, 1]")]
    IntensityOutOfRange { image: usize, pixel: usize, value: f32 },
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("event at pixel {pixel} is not part of the selection")]
    PixelNotSelected { pixel: u32 },
    #[error("event lists of unequal length ({pixels} pixels, {times} times)")]
    UnpairedEvents { pixels: usize, times: usize },
    #[error("not a spike-record file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported spike-record version {0}")]
    UnsupportedVersion(u16),
    #[error("spike-record file truncated")]
    Truncated,
    #[error("spike-record file has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for EncodeError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            EncodeError::Truncated
        } else {
            EncodeError::Io(e)
        }
    }
}

pub type Result<T, E = EncodeError> = std::result::Result<T, E>;

/// Spikes delivered to the input layer for one sample.
///
/// `indices[k]` fired at `times[k]` milliseconds. Encoders emit spikes sorted
/// by `(time, index)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpikeRecord {
    pub indices: Vec<u32>,
    pub times: Vec<f32>,
    pub duration_ms: f32,
    pub label: u16,
}

impl SpikeRecord {
    pub fn new(label: u16, duration_ms: f32) -> Self {
        Self {
            label,
            duration_ms,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn push(&mut self, index: u32, time_ms: f32) {
        self.indices.push(index);
        self.times.push(time_ms);
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f32)> + '_ {
        self.indices.iter().copied().zip(self.times.iter().copied())
    }

    /// Checks paired lengths, the time window and the index range.
    pub fn validate(&self, n_inputs: usize) -> Result<()> {
        if self.indices.len() != self.times.len() {
            return Err(EncodeError::UnpairedEvents {
                pixels: self.indices.len(),
                times: self.times.len(),
            });
        }
        for (idx, t) in self.iter() {
            if idx as usize >= n_inputs || !(0.0..self.duration_ms).contains(&t) {
                return Err(EncodeError::Config(format!(
                    "spike ({idx}, {t} ms) outside {n_inputs} inputs x [0, {}) ms",
                    self.duration_ms
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodeConfig {
    pub sim_time_ms: f64,
    /// Number of records to emit; images are reused cyclically when this
    /// exceeds the image count.
    pub n_records: usize,
    pub max_rate_hz: f64,
    pub dt_ms: f64,
    pub seed: u64,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        Self {
            sim_time_ms: 100.0,
            n_records: 1,
            max_rate_hz: 250.0,
            dt_ms: 1.0,
            seed: 0,
        }
    }
}

impl EncodeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EncodeError::Config(m.to_string()));
        if !(self.sim_time_ms > 0.0 && self.sim_time_ms.is_finite()) {
            return bad("sim_time_ms must be positive");
        }
        if self.n_records == 0 {
            return bad("n_records must be at least 1");
        }
        if !(self.max_rate_hz > 0.0 && self.max_rate_hz.is_finite()) {
            return bad("max_rate_hz must be positive");
        }
        if !(self.dt_ms > 0.0 && self.dt_ms.is_finite()) {
            return bad("dt_ms must be positive");
        }
        if self.max_rate_hz * self.dt_ms / 1000.0 > 1.0 {
            return bad("max_rate_hz * dt_ms exceeds one spike per step");
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.sim_time_ms / self.dt_ms).ceil() as usize
    }

    /// Firing probability per step for a pixel of intensity 1.
    pub fn peak_step_probability(&self) -> f64 {
        self.max_rate_hz * self.dt_ms / 1000.0
    }
}

/// Rate-codes `images` into `cfg.n_records` records; record `i` encodes image
/// `i % images.len()`.
///
/// Each record draws from its own RNG stream derived from `(cfg.seed, i)`, so
/// records are encoded in parallel and the output does not depend on
/// scheduling.
pub fn encode_frames<I>(
    images: &[I],
    labels: &[u16],
    selection: &PixelSelection,
    cfg: &EncodeConfig,
) -> Result<Vec<SpikeRecord>>
where
    I: AsRef<[f32]> + Sync,
{
    cfg.validate()?;
    if images.is_empty() {
        return Err(EncodeError::NoImages);
    }
    if images.len() != labels.len() {
        return Err(EncodeError::LabelCount {
            images: images.len(),
            labels: labels.len(),
        });
    }
    let pixels = selection.shape().pixels();
    for (i, img) in images.iter().enumerate() {
        let img = img.as_ref();
        if img.len() != pixels {
            return Err(EncodeError::ImageSize {
                image: i,
                got: img.len(),
                expected: pixels,
            });
        }
        if let Some((p, &v)) = img
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(EncodeError::IntensityOutOfRange {
                image: i,
                pixel: p,
                value: v,
            });
        }
    }

    let records = (0..cfg.n_records)
        .into_par_iter()
        .map(|i| {
            let k = i % images.len();
            encode_one(images[k].as_ref(), labels[k], selection, cfg, i as u64)
        })
        .collect();
    Ok(records)
}

fn encode_one(
    image: &[f32],
    label: u16,
    selection: &PixelSelection,
    cfg: &EncodeConfig,
    record: u64,
) -> SpikeRecord {
    let peak = cfg.peak_step_probability();
    // (input neuron, per-step probability) for pixels that can fire at all.
    let active: Vec<(u32, f64)> = selection
        .ids()
        .iter()
        .enumerate()
        .filter_map(|(rank, &id)| {
            let a = image[id as usize] as f64;
            (a > 0.0).then_some((rank as u32, a * peak))
        })
        .collect();

    let mut rng = seed::rng(seed::derive(cfg.seed, seed::stream::ENCODE, record));
    let mut out = SpikeRecord::new(label, cfg.sim_time_ms as f32);
    for step in 0..cfg.steps() {
        let t = (step as f64 * cfg.dt_ms) as f32;
        for &(neuron, p) in &active {
            if rng.gen::<f64>() < p {
                out.push(neuron, t);
            }
        }
    }
    out
}

/// ON and OFF events of one event-camera recording.
///
/// Pixel ids are row-major on the sensor grid; times are milliseconds from
/// the start of the recording.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventStream {
    pub on_pixels: Vec<u32>,
    pub on_times: Vec<f64>,
    pub off_pixels: Vec<u32>,
    pub off_times: Vec<f64>,
}

impl EventStream {
    pub fn len(&self) -> usize {
        self.on_pixels.len() + self.off_pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push_on(&mut self, pixel: u32, time_ms: f64) {
        self.on_pixels.push(pixel);
        self.on_times.push(time_ms);
    }

    pub fn push_off(&mut self, pixel: u32, time_ms: f64) {
        self.off_pixels.push(pixel);
        self.off_times.push(time_ms);
    }

    pub fn validate(&self) -> Result<()> {
        for (p, t) in [
            (&self.on_pixels, &self.on_times),
            (&self.off_pixels, &self.off_times),
        ] {
            if p.len() != t.len() {
                return Err(EncodeError::UnpairedEvents {
                    pixels: p.len(),
                    times: t.len(),
                });
            }
        }
        Ok(())
    }
}

fn filter_channel(
    pixels: &[u32],
    times: &[f64],
    keep: impl Fn(u32, f64) -> bool,
) -> (Vec<u32>, Vec<f64>) {
    pixels
        .iter()
        .zip(times)
        .filter(|&(&p, &t)| keep(p, t))
        .map(|(&p, &t)| (p, t))
        .unzip()
}

/// Keeps the events whose pixel is selected and whose time lies before
/// `sim_time_ms`. Both polarities are filtered the same way and relative
/// order is preserved.
pub fn filter_events(
    stream: &EventStream,
    selection: &PixelSelection,
    sim_time_ms: f64,
) -> EventStream {
    let table = selection.rank_table();
    let keep = |p: u32, t: f64| {
        t < sim_time_ms && table.get(p as usize).is_some_and(|&r| r != NOT_SELECTED)
    };
    let (on_pixels, on_times) = filter_channel(&stream.on_pixels, &stream.on_times, keep);
    let (off_pixels, off_times) = filter_channel(&stream.off_pixels, &stream.off_times, keep);
    EventStream {
        on_pixels,
        on_times,
        off_pixels,
        off_times,
    }
}

/// Maps a filtered stream onto `2K` input neurons for a selection of size
/// `K`: ON events take ids `[0, K)`, OFF events `[K, 2K)`.
///
/// The resulting record is sorted by `(time, index)`.
pub fn reindex_events(
    stream: &EventStream,
    selection: &PixelSelection,
    sim_time_ms: f64,
    label: u16,
) -> Result<SpikeRecord> {
    stream.validate()?;
    let table = selection.rank_table();
    let k = selection.len() as u32;
    let rank = |p: u32| match table.get(p as usize) {
        Some(&r) if r != NOT_SELECTED => Ok(r),
        _ => Err(EncodeError::PixelNotSelected { pixel: p }),
    };
    let mut spikes = Vec::with_capacity(stream.len());
    for (&p, &t) in stream.on_pixels.iter().zip(&stream.on_times) {
        spikes.push((t as f32, rank(p)?));
    }
    for (&p, &t) in stream.off_pixels.iter().zip(&stream.off_times) {
        spikes.push((t as f32, k + rank(p)?));
    }
    spikes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = SpikeRecord::new(label, sim_time_ms as f32);
    out.indices.reserve(spikes.len());
    out.times.reserve(spikes.len());
    for (t, idx) in spikes {
        out.push(idx, t);
    }
    Ok(out)
}

/// File magic of the spike-record format.
pub const RECORD_MAGIC: [u8; 4] = *b"LSMS";
pub const RECORD_VERSION: u16 = 1;
/// Magic, version and record count.
pub const HEADER_BYTES: u64 = 4 + 2 + 4;
/// Label and spike count.
pub const RECORD_HEADER_BYTES: u64 = 2 + 4;
/// Index (`u32`) and time (`f32`).
pub const SPIKE_BYTES: u64 = 4 + 4;

/// Size in bytes that [`write_records`] will produce for `records`.
pub fn encoded_len(records: &[SpikeRecord]) -> u64 {
    HEADER_BYTES
        + records
            .iter()
            .map(|r| RECORD_HEADER_BYTES + SPIKE_BYTES * r.len() as u64)
            .sum::<u64>()
}

/// Serializes records little-endian and returns the number of bytes written.
pub fn write_records_to<W: Write>(records: &[SpikeRecord], mut out: W) -> Result<u64> {
    let count = u32::try_from(records.len())
        .map_err(|_| EncodeError::Config("more than u32::MAX records".into()))?;
    out.write_all(&RECORD_MAGIC)?;
    out.write_all(&RECORD_VERSION.to_le_bytes())?;
    out.write_all(&count.to_le_bytes())?;
    for r in records {
        if r.indices.len() != r.times.len() {
            return Err(EncodeError::UnpairedEvents {
                pixels: r.indices.len(),
                times: r.times.len(),
            });
        }
        let n = u32::try_from(r.len())
            .map_err(|_| EncodeError::Config("more than u32::MAX spikes in a record".into()))?;
        out.write_all(&r.label.to_le_bytes())?;
        out.write_all(&n.to_le_bytes())?;
        for (idx, t) in r.iter() {
            out.write_all(&idx.to_le_bytes())?;
            out.write_all(&t.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(encoded_len(records))
}

pub fn write_records(records: &[SpikeRecord], path: impl AsRef<Path>) -> Result<u64> {
    let file = File::create(path)?;
    write_records_to(records, BufWriter::new(file))
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

/// Parses a spike-record stream. The format does not store the simulation
/// window, so the caller supplies it.
pub fn read_records_from<R: Read>(mut input: R, sim_time_ms: f32) -> Result<Vec<SpikeRecord>> {
    let magic = read_array::<4, _>(&mut input)?;
    if magic != RECORD_MAGIC {
        return Err(EncodeError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(read_array(&mut input)?);
    if version != RECORD_VERSION {
        return Err(EncodeError::UnsupportedVersion(version));
    }
    let count = u32::from_le_bytes(read_array(&mut input)?);
    let mut records = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        let label = u16::from_le_bytes(read_array(&mut input)?);
        let n = u32::from_le_bytes(read_array(&mut input)?) as usize;
        let mut r = SpikeRecord::new(label, sim_time_ms);
        r.indices.reserve(n.min(1 << 24));
        r.times.reserve(n.min(1 << 24));
        for _ in 0..n {
            let pair = read_array::<8, _>(&mut input)?;
            let idx = u32::from_le_bytes(pair[..4].try_into().unwrap());
            let t = f32::from_le_bytes(pair[4..].try_into().unwrap());
            r.push(idx, t);
        }
        records.push(r);
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(EncodeError::TrailingBytes(rest.len()));
    }
    Ok(records)
}

pub fn read_records(path: impl AsRef<Path>, sim_time_ms: f32) -> Result<Vec<SpikeRecord>> {
    read_records_from(BufReader::new(File::open(path)?), sim_time_ms)
}
