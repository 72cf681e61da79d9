//! Binary masks and per-pixel channel vote counts.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Boolean raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::ShapeMismatch {
                what: "mask",
                expected: width * height,
                found: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: alloc::vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: alloc::vec![true; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
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
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// True when every foreground pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.same_shape(other) && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Per-pixel count of channels voting foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreMatrix {
    width: usize,
    height: usize,
    n_channels: usize,
    counts: Vec<u8>,
}

impl ScoreMatrix {
    /// Sums the masks pixel-wise. All masks must share one shape.
    pub fn from_masks(masks: &[BinaryMask]) -> Result<Self> {
        let first = masks.first().ok_or(Error::Empty("mask list"))?;
        if masks.len() > u8::MAX as usize {
            return Err(crate::error::invalid("masks", "too many channels"));
        }
        let mut counts = alloc::vec![0u8; first.bits.len()];
        for m in masks {
            if !m.same_shape(first) {
                return Err(Error::ShapeMismatch {
                    what: "consensus mask",
                    expected: first.bits.len(),
                    found: m.bits.len(),
                });
            }
            for (c, &b) in counts.iter_mut().zip(&m.bits) {
                *c += b as u8;
            }
        }
        Ok(Self {
            width: first.width,
            height: first.height,
            n_channels: masks.len(),
            counts,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn counts(&self) -> &[u8] {
        &self.counts
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.counts[y * self.width + x]
    }

    /// Keeps pixels voted for by at least `min_votes` channels.
    pub fn at_least(&self, min_votes: usize) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.counts.iter().map(|&c| c as usize >= min_votes).collect(),
        }
    }
}
