//! Dataset parsers: MNIST IDX files, N-MNIST event recordings and binary
//! PGM image directories.

use std::fs::{self, File};
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::EventStream;
use crate::patterns::GridShape;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: truncated, need {needed} bytes, have {have}")]
    Truncated {
        path: PathBuf,
        needed: usize,
        have: usize,
    },
    #[error("{images} images but {labels} labels")]
    LengthMismatch { images: usize, labels: usize },
    #[error("{path}: {len} bytes is not a whole number of 5-byte events")]
    EventLength { path: PathBuf, len: usize },
    #[error("{path}: event at ({x}, {y}) outside a {shape} sensor")]
    EventOutOfRange {
        path: PathBuf,
        x: u8,
        y: u8,
        shape: GridShape,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("{path}: file name has no numeric class prefix")]
    MissingLabel { path: PathBuf },
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Grayscale frames with intensities in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDataset {
    pub shape: GridShape,
    pub images: Vec<Vec<f32>>,
    pub labels: Vec<u16>,
}

impl FrameDataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn truncate(&mut self, limit: usize) {
        self.images.truncate(limit);
        self.labels.truncate(limit);
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            shape: self.shape,
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn concat(mut self, other: Self) -> Self {
        assert_eq!(self.shape, other.shape, "cannot join datasets of different shapes");
        self.images.extend(other.images);
        self.labels.extend(other.labels);
        self
    }
}

/// Event-camera recordings on a fixed sensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDataset {
    pub shape: GridShape,
    pub samples: Vec<EventStream>,
    pub labels: Vec<u16>,
}

impl EventDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            shape: self.shape,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn concat(mut self, other: Self) -> Self {
        assert_eq!(self.shape, other.shape, "cannot join datasets of different shapes");
        self.samples.extend(other.samples);
        self.labels.extend(other.labels);
        self
    }
}

/// Reads a whole file, transparently inflating `.gz`.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut buf = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(BufReader::new(file))
            .read_to_end(&mut buf)
            .map_err(io_err(path))?;
    } else {
        BufReader::new(file)
            .read_to_end(&mut buf)
            .map_err(io_err(path))?;
    }
    Ok(buf)
}

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn need(path: &Path, bytes: &[u8], needed: usize) -> Result<()> {
    if bytes.len() < needed {
        return Err(DatasetError::Truncated {
            path: path.to_path_buf(),
            needed,
            have: bytes.len(),
        });
    }
    Ok(())
}

fn check_magic(path: &Path, found: u32, expected: u32) -> Result<()> {
    if found != expected {
        return Err(DatasetError::BadMagic {
            path: path.to_path_buf(),
            found,
            expected,
        });
    }
    Ok(())
}

/// Parses an IDX image file and its label file. Pixels are scaled by
/// `1/255`; `limit` keeps only the first samples. Files ending in `.gz` are
/// decompressed on the fly.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    limit: Option<usize>,
) -> Result<FrameDataset> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let img = read_maybe_gz(ip)?;
    let lab = read_maybe_gz(lp)?;

    need(ip, &img, 16)?;
    check_magic(ip, be_u32(&img, 0), IDX_IMAGES_MAGIC)?;
    let (n, rows, cols) = (
        be_u32(&img, 4) as usize,
        be_u32(&img, 8) as usize,
        be_u32(&img, 12) as usize,
    );
    need(lp, &lab, 8)?;
    check_magic(lp, be_u32(&lab, 0), IDX_LABELS_MAGIC)?;
    let n_labels = be_u32(&lab, 4) as usize;
    if n != n_labels {
        return Err(DatasetError::LengthMismatch {
            images: n,
            labels: n_labels,
        });
    }
    let shape = GridShape::new(rows, cols).map_err(|e| DatasetError::Format {
        path: ip.to_path_buf(),
        reason: e.to_string(),
    })?;
    let px = shape.pixels();
    need(ip, &img, 16 + n * px)?;
    need(lp, &lab, 8 + n)?;

    let take = limit.map_or(n, |l| l.min(n));
    let images = img[16..16 + take * px]
        .chunks_exact(px)
        .map(|c| c.iter().map(|&b| b as f32 / 255.0).collect())
        .collect();
    let labels = lab[8..8 + take].iter().map(|&b| b as u16).collect();
    Ok(FrameDataset {
        shape,
        images,
        labels,
    })
}

/// Serializes frames as an IDX image/label pair (uncompressed).
/// Intensities are quantized to `round(255 * a)`.
pub fn write_idx(
    data: &FrameDataset,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> io::Result<()> {
    let n = data.len() as u32;
    let mut img = Vec::with_capacity(16 + data.len() * data.shape.pixels());
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&n.to_be_bytes());
    img.extend_from_slice(&(data.shape.height as u32).to_be_bytes());
    img.extend_from_slice(&(data.shape.width as u32).to_be_bytes());
    for im in &data.images {
        img.extend(im.iter().map(|&a| (a.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    let mut lab = Vec::with_capacity(8 + data.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&n.to_be_bytes());
    lab.extend(data.labels.iter().map(|&l| l as u8));
    fs::write(images_path, img)?;
    fs::write(labels_path, lab)
}

/// Sensor grid of N-MNIST recordings.
pub const NMNIST_SHAPE: GridShape = GridShape {
    height: 34,
    width: 34,
};

/// One decoded address event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AerEvent {
    pub x: u8,
    pub y: u8,
    pub on: bool,
    /// Microseconds, 23 significant bits.
    pub timestamp_us: u32,
}

const TIMESTAMP_MASK: u32 = (1 << 23) - 1;

impl AerEvent {
    /// Decodes the 5-byte layout: x, y, then polarity in bit 7 of the third
    /// byte followed by a 23-bit big-endian microsecond timestamp.
    pub fn decode(b: [u8; 5]) -> Self {
        Self {
            x: b[0],
            y: b[1],
            on: b[2] & 0x80 != 0,
            timestamp_us: ((b[2] as u32 & 0x7f) << 16) | ((b[3] as u32) << 8) | b[4] as u32,
        }
    }

    pub fn encode(&self) -> [u8; 5] {
        let t = self.timestamp_us & TIMESTAMP_MASK;
        [
            self.x,
            self.y,
            ((self.on as u8) << 7) | (t >> 16) as u8,
            (t >> 8) as u8,
            t as u8,
        ]
    }
}

/// Decodes one recording into ON/OFF lists with pixel `y * W + x` and times
/// in milliseconds.
pub fn parse_nmnist(bytes: &[u8], path: &Path) -> Result<EventStream> {
    if bytes.len() % 5 != 0 {
        return Err(DatasetError::EventLength {
            path: path.to_path_buf(),
            len: bytes.len(),
        });
    }
    let shape = NMNIST_SHAPE;
    let mut stream = EventStream::default();
    for chunk in bytes.chunks_exact(5) {
        let ev = AerEvent::decode(chunk.try_into().unwrap());
        if ev.x as usize >= shape.width || ev.y as usize >= shape.height {
            return Err(DatasetError::EventOutOfRange {
                path: path.to_path_buf(),
                x: ev.x,
                y: ev.y,
                shape,
            });
        }
        let pixel = shape.id(ev.y as usize, ev.x as usize);
        let t_ms = ev.timestamp_us as f64 / 1000.0;
        if ev.on {
            stream.push_on(pixel, t_ms);
        } else {
            stream.push_off(pixel, t_ms);
        }
    }
    Ok(stream)
}

pub fn load_nmnist_file(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_nmnist(&bytes, path)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

/// Loads `dir/<class>/*.bin` for classes `0..=9`.
///
/// Samples are interleaved across classes (first file of every class, then
/// the second, ...) so that any prefix is roughly class balanced; `limit`
/// keeps that prefix.
pub fn load_nmnist_dir(dir: impl AsRef<Path>, limit: Option<usize>) -> Result<EventDataset> {
    let dir = dir.as_ref();
    let mut per_class: Vec<(u16, Vec<PathBuf>)> = Vec::new();
    for class in 0u16..10 {
        let sub = dir.join(class.to_string());
        if !sub.is_dir() {
            continue;
        }
        let files = sorted_entries(&sub)?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "bin"))
            .collect();
        per_class.push((class, files));
    }
    if per_class.is_empty() {
        return Err(DatasetError::Format {
            path: dir.to_path_buf(),
            reason: "no class subdirectories 0-9".into(),
        });
    }

    let longest = per_class.iter().map(|(_, f)| f.len()).max().unwrap_or(0);
    let order = (0..longest).flat_map(|i| {
        per_class
            .iter()
            .filter_map(move |(c, files)| files.get(i).map(|p| (*c, p)))
    });
    let cap = limit.unwrap_or(usize::MAX);
    let mut data = EventDataset {
        shape: NMNIST_SHAPE,
        samples: Vec::new(),
        labels: Vec::new(),
    };
    for (class, path) in order.take(cap) {
        data.samples.push(load_nmnist_file(path)?);
        data.labels.push(class);
    }
    Ok(data)
}

/// Region of a source image kept before resizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CropSpec {
    /// Keep the whole image.
    #[default]
    None,
    /// Centered window of the given size (clamped to the image).
    Center { height: usize, width: usize },
    /// Explicit window.
    Window {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
}

/// A decoded grayscale raster.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub shape: GridShape,
    /// Intensities in `[0, 1]`, row-major.
    pub pixels: Vec<f32>,
}

impl GrayImage {
    pub fn crop(&self, spec: CropSpec) -> Option<GrayImage> {
        let (h, w) = (self.shape.height, self.shape.width);
        let (top, left, ch, cw) = match spec {
            CropSpec::None => return Some(self.clone()),
            CropSpec::Center { height, width } => {
                let ch = height.min(h);
                let cw = width.min(w);
                ((h - ch) / 2, (w - cw) / 2, ch, cw)
            }
            CropSpec::Window {
                top,
                left,
                height,
                width,
            } => {
                if top + height > h || left + width > w {
                    return None;
                }
                (top, left, height, width)
            }
        };
        let shape = GridShape::new(ch, cw).ok()?;
        let pixels = (top..top + ch)
            .flat_map(|r| self.pixels[r * w + left..r * w + left + cw].iter().copied())
            .collect();
        Some(GrayImage { shape, pixels })
    }

    /// Nearest-neighbor resampling (pixel centers mapped to source pixels).
    pub fn resize_nearest(&self, target: GridShape) -> GrayImage {
        let (sh, sw) = (self.shape.height, self.shape.width);
        let src = |dst: usize, d: usize, s: usize| ((2 * dst + 1) * s / (2 * d)).min(s - 1);
        let mut pixels = Vec::with_capacity(target.pixels());
        for r in 0..target.height {
            let sr = src(r, target.height, sh);
            for c in 0..target.width {
                let sc = src(c, target.width, sw);
                pixels.push(self.pixels[sr * sw + sc]);
            }
        }
        GrayImage {
            shape: target,
            pixels,
        }
    }
}

fn pgm_format(path: &Path, reason: impl Into<String>) -> DatasetError {
    DatasetError::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Parses a binary (P5) PGM with 8- or 16-bit samples.
pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut pos = 0;
    let mut token = || -> Option<&[u8]> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (pos > start).then(|| &bytes[start..pos])
    };
    if token() != Some(b"P5".as_slice()) {
        return Err(pgm_format(path, "not a binary PGM (P5)"));
    }
    let mut num = |what: &str| -> Result<usize> {
        token()
            .and_then(|t| std::str::from_utf8(t).ok())
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| pgm_format(path, format!("bad {what}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(pgm_format(path, format!("maxval {maxval} out of range")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let data = &bytes[(pos + 1).min(bytes.len())..];
    let shape = GridShape::new(height, width).map_err(|e| pgm_format(path, e.to_string()))?;
    let wide = maxval > 255;
    let needed = shape.pixels() * if wide { 2 } else { 1 };
    need(path, data, needed)?;
    let scale = 1.0 / maxval as f32;
    let pixels = if wide {
        data[..needed]
            .chunks_exact(2)
            .map(|b| (u16::from_be_bytes([b[0], b[1]]) as f32 * scale).min(1.0))
            .collect()
    } else {
        data[..needed]
            .iter()
            .map(|&b| (b as f32 * scale).min(1.0))
            .collect()
    };
    Ok(GrayImage { shape, pixels })
}

/// Encodes an 8-bit P5 PGM.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.shape.width, img.shape.height).into_bytes();
    out.extend(
        img.pixels
            .iter()
            .map(|&a| (a.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

/// Class id from a file name of the form `<class>_<anything>.pgm`.
pub fn label_from_name(path: &Path) -> Result<u16> {
    path.file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.split_once('_'))
        .and_then(|(prefix, _)| prefix.parse().ok())
        .ok_or_else(|| DatasetError::MissingLabel {
            path: path.to_path_buf(),
        })
}

/// Loads every `*.pgm` in `dir` (sorted by name), crops, resizes to
/// `target` and takes the class from the file-name prefix.
pub fn load_image_dir(
    dir: impl AsRef<Path>,
    target: GridShape,
    crop: CropSpec,
) -> Result<FrameDataset> {
    let dir = dir.as_ref();
    let mut data = FrameDataset {
        shape: target,
        images: Vec::new(),
        labels: Vec::new(),
    };
    for path in sorted_entries(dir)? {
        if !path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            continue;
        }
        let label = label_from_name(&path)?;
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let img = parse_pgm(&bytes, &path)?;
        let cropped = img
            .crop(crop)
            .ok_or_else(|| pgm_format(&path, format!("crop {crop:?} exceeds {}", img.shape)))?;
        data.images.push(cropped.resize_nearest(target).pixels);
        data.labels.push(label);
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> &'static Path {
        Path::new("fixture")
    }

    #[test]
    fn aer_layout_examples() {
        let on = AerEvent::decode([0x01, 0x02, 0x80, 0x00, 0x64]);
        assert_eq!(
            on,
            AerEvent {
                x: 1,
                y: 2,
                on: true,
                timestamp_us: 100
            }
        );
        let off = AerEvent::decode([0x01, 0x02, 0x00, 0x00, 0x64]);
        assert!(!off.on);
        assert_eq!(off.timestamp_us, 100);

        let s = parse_nmnist(&[0x01, 0x02, 0x80, 0x00, 0x64], p()).unwrap();
        assert_eq!(s.on_pixels, [69]);
        assert_eq!(s.on_times, [0.1]);
        assert!(s.off_pixels.is_empty());
    }

    #[test]
    fn timestamp_uses_all_23_bits() {
        let e = AerEvent::decode([0, 0, 0xff, 0xff, 0xff]);
        assert!(e.on);
        assert_eq!(e.timestamp_us, TIMESTAMP_MASK);
    }

    #[test]
    fn bad_event_files() {
        assert!(matches!(
            parse_nmnist(&[0; 7], p()),
            Err(DatasetError::EventLength { len: 7, .. })
        ));
        assert!(matches!(
            parse_nmnist(&[34, 0, 0, 0, 0], p()),
            Err(DatasetError::EventOutOfRange { x: 34, .. })
        ));
    }

    proptest! {
        #[test]
        fn aer_decode_inverts_encode(x in 0u8..34, y in 0u8..34, on: bool, t in 0u32..(1 << 23)) {
            let e = AerEvent { x, y, on, timestamp_us: t };
            prop_assert_eq!(AerEvent::decode(e.encode()), e);
        }
    }

    #[test]
    fn pgm_parse_with_comment_and_resize() {
        let mut bytes = b"P5\n# made by hand\n4 4\n255\n".to_vec();
        bytes.extend(std::iter::repeat(128u8).take(16));
        let img = parse_pgm(&bytes, p()).unwrap();
        assert_eq!(img.shape, GridShape::new(4, 4).unwrap());
        let small = img.resize_nearest(GridShape::new(2, 2).unwrap());
        assert!(small.pixels.iter().all(|&a| a == 128.0 / 255.0));
    }

    #[test]
    fn pgm_sixteen_bit() {
        let mut bytes = b"P5 1 2 1000\n".to_vec();
        bytes.extend_from_slice(&500u16.to_be_bytes());
        bytes.extend_from_slice(&1000u16.to_be_bytes());
        let img = parse_pgm(&bytes, p()).unwrap();
        assert_eq!(img.pixels, [0.5, 1.0]);
    }

    #[test]
    fn pgm_rejects_garbage() {
        assert!(parse_pgm(b"P2\n1 1\n255\n0", p()).is_err());
        assert!(parse_pgm(b"P5\n2 2\n255\n\x00", p()).is_err());
        assert!(parse_pgm(b"P5\nx 2\n255\n", p()).is_err());
    }

    #[test]
    fn crops() {
        let img = GrayImage {
            shape: GridShape::new(4, 4).unwrap(),
            pixels: (0..16).map(|i| i as f32 / 15.0).collect(),
        };
        let c = img.crop(CropSpec::Center { height: 2, width: 2 }).unwrap();
        assert_eq!(c.pixels, [5.0 / 15.0, 6.0 / 15.0, 9.0 / 15.0, 10.0 / 15.0]);
        let w = img
            .crop(CropSpec::Window {
                top: 3,
                left: 0,
                height: 1,
                width: 4,
            })
            .unwrap();
        assert_eq!(w.pixels.len(), 4);
        assert!(img
            .crop(CropSpec::Window {
                top: 3,
                left: 0,
                height: 2,
                width: 4
            })
            .is_none());
    }

    #[test]
    fn nearest_upscale_repeats_pixels() {
        let img = GrayImage {
            shape: GridShape::new(1, 2).unwrap(),
            pixels: vec![0.0, 1.0],
        };
        let up = img.resize_nearest(GridShape::new(2, 4).unwrap());
        assert_eq!(up.pixels, [0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn labels_from_names() {
        assert_eq!(label_from_name(Path::new("d/3_foo.pgm")).unwrap(), 3);
        assert_eq!(label_from_name(Path::new("12_a_b.pgm")).unwrap(), 12);
        assert!(label_from_name(Path::new("foo.pgm")).is_err());
        assert!(label_from_name(Path::new("x_foo.pgm")).is_err());
    }
}
