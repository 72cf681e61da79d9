//! Hand-crafted region descriptors for the linear baseline.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::echogram::Grid;
use crate::error::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const N_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FeatureVector {
    /// Mean normalized Sv over member pixels and channels.
    pub mean_intensity: f64,
    /// `sqrt(1 - lambda_min / lambda_max)` of the region's moment ellipse.
    pub eccentricity: f64,
    /// `4 pi A / P^2`, capped at 1.
    pub circularity: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; N_FEATURES] {
        [self.mean_intensity, self.eccentricity, self.circularity]
    }

    pub fn from_array(a: [f64; N_FEATURES]) -> Self {
        Self {
            mean_intensity: a[0],
            eccentricity: a[1],
            circularity: a[2],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Second moments of the union of unit pixel squares: point moments plus
/// the `1/12` variance each square contributes along each axis. These are
/// exact for block-scaled shapes, so derived ratios are scale invariant.
fn covariance(pixels: &[[u32; 2]]) -> (f64, f64, f64) {
    let n = pixels.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &[x, y] in pixels {
        sx += f64::from(x);
        sy += f64::from(y);
    }
    let (cx, cy) = (sx / n, sy / n);
    let (mut vxx, mut vyy, mut vxy) = (0.0, 0.0, 0.0);
    for &[x, y] in pixels {
        let (dx, dy) = (f64::from(x) - cx, f64::from(y) - cy);
        vxx += dx * dx;
        vyy += dy * dy;
        vxy += dx * dy;
    }
    (vxx / n + 1.0 / 12.0, vyy / n + 1.0 / 12.0, vxy / n)
}

/// Eccentricity of the moment ellipse, in `[0, 1)`.
pub fn eccentricity(pixels: &[[u32; 2]]) -> f64 {
    let (a, c, b) = covariance(pixels);
    let mid = 0.5 * (a + c);
    let rad = libm::sqrt(0.25 * (a - c) * (a - c) + b * b);
    let (l_max, l_min) = (mid + rad, (mid - rad).max(0.0));
    libm::sqrt((1.0 - l_min / l_max).max(0.0))
}

/// Number of unit pixel edges between a member pixel and a non-member
/// 4-neighbour (the boundary length of the pixel union, holes included).
pub fn exterior_edges(pixels: &[[u32; 2]]) -> usize {
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
    for &[x, y] in pixels {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    // Local bitmap with a one-pixel empty frame.
    let w = (x1 - x0) as usize + 3;
    let h = (y1 - y0) as usize + 3;
    let mut inside = alloc::vec![false; w * h];
    for &[x, y] in pixels {
        inside[(y - y0 + 1) as usize * w + (x - x0 + 1) as usize] = true;
    }
    let mut edges = 0;
    for &[x, y] in pixels {
        let i = (y - y0 + 1) as usize * w + (x - x0 + 1) as usize;
        for j in [i - 1, i + 1, i - w, i + w] {
            edges += !inside[j] as usize;
        }
    }
    edges
}

/// `4 pi A / P^2` with `P` the exterior edge count scaled by `pi / 4`, the
/// mean ratio of Euclidean to axis-aligned length over orientations.
/// The scaled perimeter underestimates for axis-aligned blocks, so the
/// result is capped at 1.
pub fn circularity(pixels: &[[u32; 2]]) -> f64 {
    let area = pixels.len() as f64;
    let perimeter = 0.25 * PI * exterior_edges(pixels) as f64;
    (4.0 * PI * area / (perimeter * perimeter)).min(1.0)
}

/// Describes one region by its mean intensity (averaged over `channels`),
/// eccentricity and circularity.
pub fn extract_features(pixels: &[[u32; 2]], channels: &[Grid<f32>]) -> Result<FeatureVector> {
    if pixels.is_empty() {
        return Err(Error::Empty("region"));
    }
    if channels.is_empty() {
        return Err(Error::Empty("channel list"));
    }
    let mut sum = 0.0;
    for g in channels {
        for &[x, y] in pixels {
            sum += f64::from(g.get(x as usize, y as usize));
        }
    }
    let f = FeatureVector {
        mean_intensity: sum / (pixels.len() * channels.len()) as f64,
        eccentricity: eccentricity(pixels),
        circularity: circularity(pixels),
    };
    if !f.is_finite() {
        return Err(Error::NonFinite("region features"));
    }
    Ok(f)
}

/// Pixels of a rasterized disk of the given radius centred on `(c, c)`.
pub fn disk_pixels(radius: u32) -> Vec<[u32; 2]> {
    let c = radius as i64;
    let r2 = (radius as i64) * (radius as i64);
    let mut px = Vec::new();
    for y in 0..=2 * c {
        for x in 0..=2 * c {
            if (x - c) * (x - c) + (y - c) * (y - c) <= r2 {
                px.push([x as u32, y as u32]);
            }
        }
    }
    px
}
