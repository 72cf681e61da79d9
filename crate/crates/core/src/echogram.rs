//! Multi-channel echogram rasters and Sv normalization.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Row-major 2-D raster; `x` indexes time bins, `y` indexes depth bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid("grid", "dimensions must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch {
                what: "grid",
                expected: width * height,
                found: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        Self {
            width,
            height,
            data: alloc::vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Acquisition metadata carried alongside the Sv rasters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EchogramMeta {
    /// Acoustic frequency per channel, strictly increasing.
    pub frequencies_khz: Vec<f32>,
    pub depth_min_m: f32,
    pub depth_max_m: f32,
    pub start_epoch_s: i64,
    pub duration_s: f32,
}

/// Multifrequency echogram: one Sv grid (dB) per channel, all the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Echogram {
    width: usize,
    height: usize,
    meta: EchogramMeta,
    /// Channel-major, then row-major.
    data: Vec<f32>,
}

impl Echogram {
    /// Validates and builds an echogram from channel-major, row-major Sv data.
    pub fn new(width: usize, height: usize, meta: EchogramMeta, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidEchogram("width and height must be positive"));
        }
        let n = meta.frequencies_khz.len();
        if n == 0 {
            return Err(Error::InvalidEchogram("at least one channel is required"));
        }
        if !meta.frequencies_khz.iter().all(|f| f.is_finite() && *f > 0.0) {
            return Err(Error::InvalidEchogram("frequencies must be positive"));
        }
        if meta.frequencies_khz.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidEchogram("frequencies must be strictly increasing"));
        }
        if !(meta.depth_min_m.is_finite()
            && meta.depth_max_m.is_finite()
            && meta.depth_min_m < meta.depth_max_m)
        {
            return Err(Error::InvalidEchogram("depth range must be increasing"));
        }
        if !meta.duration_s.is_finite() {
            return Err(Error::InvalidEchogram("duration must be finite"));
        }
        let expected = width * height * n;
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                what: "echogram payload",
                expected,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("echogram Sv data"));
        }
        Ok(Self {
            width,
            height,
            meta,
            data,
        })
    }

    /// Builds an echogram from per-channel grids.
    pub fn from_channels(meta: EchogramMeta, channels: Vec<Grid<f32>>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or(Error::InvalidEchogram("at least one channel is required"))?;
        let (width, height) = (first.width(), first.height());
        if channels.len() != meta.frequencies_khz.len() {
            return Err(Error::ShapeMismatch {
                what: "channel count",
                expected: meta.frequencies_khz.len(),
                found: channels.len(),
            });
        }
        let mut data = Vec::with_capacity(width * height * channels.len());
        for g in &channels {
            if g.width() != width || g.height() != height {
                return Err(Error::InvalidEchogram("channel grids differ in shape"));
            }
            data.extend_from_slice(g.as_slice());
        }
        Self::new(width, height, meta, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_channels(&self) -> usize {
        self.meta.frequencies_khz.len()
    }

    pub fn meta(&self) -> &EchogramMeta {
        &self.meta
    }

    pub fn frequencies_khz(&self) -> &[f32] {
        &self.meta.frequencies_khz
    }

    /// Sv values of one channel, row-major.
    pub fn channel(&self, c: usize) -> Result<&[f32]> {
        if c >= self.n_channels() {
            return Err(Error::UnknownChannel(c));
        }
        let n = self.width * self.height;
        Ok(&self.data[c * n..(c + 1) * n])
    }

    pub fn channel_grid(&self, c: usize) -> Result<Grid<f32>> {
        Grid::new(self.width, self.height, self.channel(c)?.to_vec())
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Full channel-major payload.
    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Display/processing window mapping Sv (dB) onto the unit interval.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SvWindow {
    pub lo_db: f32,
    pub hi_db: f32,
}

impl Default for SvWindow {
    fn default() -> Self {
        Self {
            lo_db: -90.0,
            hi_db: -30.0,
        }
    }
}

impl SvWindow {
    pub fn new(lo_db: f32, hi_db: f32) -> Result<Self> {
        let w = Self { lo_db, hi_db };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo_db.is_finite() && self.hi_db.is_finite() && self.lo_db < self.hi_db) {
            return Err(invalid("sv window", "lo_db must be below hi_db"));
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, v: f32) -> f32 {
        ((v - self.lo_db) / (self.hi_db - self.lo_db)).clamp(0.0, 1.0)
    }
}

/// Maps every channel of `e` through `clamp((v - lo) / (hi - lo), 0, 1)`.
pub fn normalize_sv(e: &Echogram, lo_db: f32, hi_db: f32) -> Result<Vec<Grid<f32>>> {
    let window = SvWindow::new(lo_db, hi_db)?;
    Ok(normalize_with(e, &window))
}

pub(crate) fn normalize_with(e: &Echogram, window: &SvWindow) -> Vec<Grid<f32>> {
    let n = e.width * e.height;
    e.data
        .chunks_exact(n)
        .map(|chunk| Grid {
            width: e.width,
            height: e.height,
            data: chunk.iter().map(|&v| window.apply(v)).collect(),
        })
        .collect()
}
