//! Input patterns: which pixels of an `H x W` grid feed the input layer.
//!
//! Pixel ids are row-major (`id = row * W + col`). Every selection is sorted,
//! duplicate free and non-empty, and its length is the input-layer size.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("grid must be at least 1x1, got {height}x{width}")]
    EmptyGrid { height: usize, width: usize },
    #[error("scanline pattern needs at least one line")]
    NoLines,
    #[error("stride must be at least 1")]
    ZeroStride,
    #[error("patch size {size} does not fit a {height}x{width} grid")]
    PatchTooLarge {
        size: usize,
        height: usize,
        width: usize,
    },
    #[error("patch size must be at least 1")]
    ZeroPatch,
    #[error("patch stride {stride} is smaller than patch size {size}")]
    OverlappingPatches { size: usize, stride: usize },
    #[error("line endpoint ({row}, {col}) outside the grid")]
    EndpointOutOfRange { row: usize, col: usize },
    #[error("invalid pixel selection: {0}")]
    InvalidSelection(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = PatternError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub height: usize,
    pub width: usize,
}

impl GridShape {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(PatternError::EmptyGrid { height, width });
        }
        Ok(Self { height, width })
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn id(&self, row: usize, col: usize) -> u32 {
        (row * self.width + col) as u32
    }

    #[inline]
    pub fn coords(&self, id: u32) -> (usize, usize) {
        let id = id as usize;
        (id / self.width, id % self.width)
    }

    /// Border pixels in row-major order.
    pub fn border(&self) -> Vec<(usize, usize)> {
        let (h, w) = (self.height, self.width);
        let mut out = Vec::new();
        for r in 0..h {
            for c in 0..w {
                if r == 0 || c == 0 || r + 1 == h || c + 1 == w {
                    out.push((r, c));
                }
            }
        }
        out
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// One of the four input patterns together with its geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PatternKind {
    Fullscale,
    /// `lines: None` picks a line count whose expected coverage matches the
    /// stride-2 chessboard on the same grid.
    Scanline { lines: Option<usize> },
    Chessboard { stride: usize },
    Patch { size: usize, stride: usize },
}

impl PatternKind {
    pub const FULLSCALE: Self = Self::Fullscale;
    pub const SCANLINE: Self = Self::Scanline { lines: None };
    pub const CHESSBOARD: Self = Self::Chessboard { stride: 2 };
    pub const PATCH: Self = Self::Patch { size: 2, stride: 4 };

    /// Short name used in tables and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Self::Fullscale => "fullscale",
            Self::Scanline { .. } => "scanline",
            Self::Chessboard { .. } => "chessboard",
            Self::Patch { .. } => "patch",
        }
    }

    /// Parses a pattern name into its default geometry.
    pub fn from_name(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "fullscale" | "fs" => Some(Self::FULLSCALE),
            "scanline" | "sl" => Some(Self::SCANLINE),
            "chessboard" | "cb" => Some(Self::CHESSBOARD),
            "patch" | "pa" => Some(Self::PATCH),
            _ => None,
        }
    }

    /// Checks the geometry against a grid without building the selection.
    pub fn validate(&self, shape: GridShape) -> Result<()> {
        match *self {
            Self::Fullscale => Ok(()),
            Self::Scanline { lines } => match lines {
                Some(0) => Err(PatternError::NoLines),
                _ => Ok(()),
            },
            Self::Chessboard { stride } => {
                if stride == 0 {
                    Err(PatternError::ZeroStride)
                } else {
                    Ok(())
                }
            }
            Self::Patch { size, stride } => check_patch(shape, size, stride),
        }
    }

    /// Builds the selection. `seed` only matters for scanlines.
    pub fn select(&self, shape: GridShape, seed: u64) -> Result<PixelSelection> {
        match *self {
            Self::Fullscale => Ok(select_fullscale(shape)),
            Self::Scanline { lines } => {
                let n = lines.unwrap_or_else(|| default_scanline_count(shape));
                select_scanline(shape, n, seed)
            }
            Self::Chessboard { stride } => select_chessboard(shape, stride),
            Self::Patch { size, stride } => select_patch(shape, size, stride),
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sorted, duplicate-free, non-empty set of pixel ids on a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelSelection {
    shape: GridShape,
    ids: Vec<u32>,
}

/// Sentinel in [`PixelSelection::rank_table`] for pixels outside the selection.
pub const NOT_SELECTED: u32 = u32::MAX;

impl PixelSelection {
    /// Validates the invariants; ids must already be strictly increasing.
    pub fn from_ids(shape: GridShape, ids: Vec<u32>) -> Result<Self> {
        if ids.is_empty() {
            return Err(PatternError::InvalidSelection("empty".into()));
        }
        if let Some(w) = ids.windows(2).find(|w| w[0] >= w[1]) {
            return Err(PatternError::InvalidSelection(format!(
                "ids not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        let last = *ids.last().unwrap();
        if last as usize >= shape.pixels() {
            return Err(PatternError::InvalidSelection(format!(
                "id {last} outside a {shape} grid"
            )));
        }
        Ok(Self { shape, ids })
    }

    fn from_set(shape: GridShape, set: BTreeSet<u32>) -> Self {
        Self {
            shape,
            ids: set.into_iter().collect(),
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, pixel: u32) -> bool {
        self.ids.binary_search(&pixel).is_ok()
    }

    /// Dense input-neuron id of `pixel`, i.e. its position in the selection.
    pub fn rank(&self, pixel: u32) -> Option<u32> {
        self.ids.binary_search(&pixel).ok().map(|r| r as u32)
    }

    /// Lookup table of length `H*W`: rank of each pixel or [`NOT_SELECTED`].
    pub fn rank_table(&self) -> Vec<u32> {
        let mut table = vec![NOT_SELECTED; self.shape.pixels()];
        for (rank, &id) in self.ids.iter().enumerate() {
            table[id as usize] = rank as u32;
        }
        table
    }

    /// Writes one id per line.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        for id in &self.ids {
            writeln!(out, "{id}")?;
        }
        out.flush()
    }

    pub fn save_text(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_text(io::BufWriter::new(file))
    }

    pub fn read_text<R: BufRead>(shape: GridShape, input: R) -> Result<Self> {
        let mut ids = Vec::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let id = line
                .parse::<u32>()
                .map_err(|e| PatternError::InvalidSelection(format!("{line:?}: {e}")))?;
            ids.push(id);
        }
        Self::from_ids(shape, ids)
    }
}

pub fn select_fullscale(shape: GridShape) -> PixelSelection {
    PixelSelection {
        shape,
        ids: (0..shape.pixels() as u32).collect(),
    }
}

/// Keeps `(r, c)` when both coordinates are multiples of `stride`.
pub fn select_chessboard(shape: GridShape, stride: usize) -> Result<PixelSelection> {
    if stride == 0 {
        return Err(PatternError::ZeroStride);
    }
    let ids = (0..shape.height)
        .step_by(stride)
        .flat_map(|r| (0..shape.width).step_by(stride).map(move |c| shape.id(r, c)))
        .collect();
    Ok(PixelSelection { shape, ids })
}

fn check_patch(shape: GridShape, size: usize, stride: usize) -> Result<()> {
    if size == 0 {
        return Err(PatternError::ZeroPatch);
    }
    if size > shape.height.min(shape.width) {
        return Err(PatternError::PatchTooLarge {
            size,
            height: shape.height,
            width: shape.width,
        });
    }
    if stride < size {
        return Err(PatternError::OverlappingPatches { size, stride });
    }
    Ok(())
}

/// Square `size x size` patches with top-left corners on a `stride` lattice,
/// kept only where the whole square fits.
pub fn select_patch(shape: GridShape, size: usize, stride: usize) -> Result<PixelSelection> {
    check_patch(shape, size, stride)?;
    let corners = |extent: usize| (0..=extent - size).step_by(stride);
    let mut ids = Vec::new();
    for r0 in corners(shape.height) {
        for r in r0..r0 + size {
            for c0 in corners(shape.width) {
                ids.extend((c0..c0 + size).map(|c| shape.id(r, c)));
            }
        }
    }
    // Rows are emitted in order and patches never overlap (stride >= size),
    // so the ids are already strictly increasing.
    debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
    Ok(PixelSelection { shape, ids })
}

/// Integer line rasterization between two grid points, endpoints included.
///
/// Classic Bresenham/midpoint stepping: one pixel per step along the major
/// axis, so a line covers `max(|dr|, |dc|) + 1` pixels.
pub fn rasterize_line(from: (usize, usize), to: (usize, usize)) -> Vec<(usize, usize)> {
    let (mut r, mut c) = (from.0 as i64, from.1 as i64);
    let (r1, c1) = (to.0 as i64, to.1 as i64);
    let dr = (r1 - r).abs();
    let dc = -(c1 - c).abs();
    let sr = if r < r1 { 1 } else { -1 };
    let sc = if c < c1 { 1 } else { -1 };
    let mut err = dr + dc;
    let mut out = Vec::with_capacity((dr.max(-dc) + 1) as usize);
    loop {
        out.push((r as usize, c as usize));
        if r == r1 && c == c1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dc {
            err += dc;
            r += sr;
        }
        if e2 <= dr {
            err += dr;
            c += sc;
        }
    }
    out
}

/// Union of the rasterized lines between the given endpoint pairs.
pub fn scanline_from_endpoints(
    shape: GridShape,
    lines: &[((usize, usize), (usize, usize))],
) -> Result<PixelSelection> {
    if lines.is_empty() {
        return Err(PatternError::NoLines);
    }
    let mut set = BTreeSet::new();
    for &(a, b) in lines {
        for (row, col) in [a, b] {
            if row >= shape.height || col >= shape.width {
                return Err(PatternError::EndpointOutOfRange { row, col });
            }
        }
        set.extend(rasterize_line(a, b).into_iter().map(|(r, c)| shape.id(r, c)));
    }
    Ok(PixelSelection::from_set(shape, set))
}

/// Draws `n_lines` endpoint pairs uniformly from the border pixels,
/// rejecting coincident endpoints.
pub fn scanline_endpoints(
    shape: GridShape,
    n_lines: usize,
    seed: u64,
) -> Vec<((usize, usize), (usize, usize))> {
    let border = shape.border();
    let mut rng = seed::rng(seed::derive(seed, seed::stream::SCANLINE, 0));
    (0..n_lines)
        .map(|_| {
            let a = border[rng.gen_range(0..border.len())];
            if border.len() == 1 {
                return (a, a);
            }
            loop {
                let b = border[rng.gen_range(0..border.len())];
                if b != a {
                    return (a, b);
                }
            }
        })
        .collect()
}

pub fn select_scanline(shape: GridShape, n_lines: usize, seed: u64) -> Result<PixelSelection> {
    if n_lines == 0 {
        return Err(PatternError::NoLines);
    }
    scanline_from_endpoints(shape, &scanline_endpoints(shape, n_lines, seed))
}

/// Expected pixel count of one line between two distinct random border
/// points, by exact enumeration of all ordered endpoint pairs.
pub fn expected_line_pixels(shape: GridShape) -> f64 {
    let border = shape.border();
    if border.len() < 2 {
        return 1.0;
    }
    let mut total = 0u64;
    for &(r0, c0) in &border {
        for &(r1, c1) in &border {
            if (r0, c0) != (r1, c1) {
                total += (r0.abs_diff(r1).max(c0.abs_diff(c1)) + 1) as u64;
            }
        }
    }
    let pairs = border.len() * (border.len() - 1);
    total as f64 / pairs as f64
}

/// Line count whose summed expected length matches the stride-2 chessboard.
pub fn default_scanline_count(shape: GridShape) -> usize {
    let target = shape.height.div_ceil(2) * shape.width.div_ceil(2);
    ((target as f64 / expected_line_pixels(shape)).round() as usize).max(1)
}
