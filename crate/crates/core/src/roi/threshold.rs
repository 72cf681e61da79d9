//! Local-mean adaptive binarization over a summed-area table.
//!
//! Values are quantized to 24-bit fixed point before summation so the table
//! holds exact integers; any windowed sum is then exact and independent of
//! summation order.

use alloc::vec::Vec;

use crate::echogram::Grid;
use crate::error::{invalid, Result};
use crate::mask::BinaryMask;

const FIXED_ONE: f64 = (1u64 << 24) as f64;

/// Fixed-point image of a unit-interval value.
#[inline]
pub fn quantize_unit(v: f32) -> u64 {
    libm::round(f64::from(v.clamp(0.0, 1.0)) * FIXED_ONE) as u64
}

/// Foreground decision shared by the table-based and direct evaluations:
/// the pixel is foreground when `value * (1 - t)` exceeds the mean of its
/// window, i.e. it is brighter than the local mean by the factor `1/(1 - t)`.
#[inline]
pub fn is_foreground(value_q: u64, window_sum_q: u64, window_count: u64, t: f64) -> bool {
    (value_q as f64) * (window_count as f64) * (1.0 - t) > window_sum_q as f64
}

pub(crate) fn check_params(window: usize, t: f64) -> Result<()> {
    if window < 3 || window % 2 == 0 {
        return Err(invalid("thresh_window", "must be odd and at least 3"));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(invalid("thresh_offset", "must lie strictly between 0 and 1"));
    }
    Ok(())
}

/// Summed-area table with a zero guard row and column.
struct IntegralImage {
    stride: usize,
    sums: Vec<u64>,
}

impl IntegralImage {
    fn new(q: &[u64], w: usize, h: usize) -> Self {
        let stride = w + 1;
        let mut sums = alloc::vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let mut row_sum = 0u64;
            for x in 0..w {
                row_sum += q[y * w + x];
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row_sum;
            }
        }
        Self { stride, sums }
    }

    /// Sum over the half-open rectangle `[x0, x1) x [y0, y1)`.
    #[inline]
    fn sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> u64 {
        let s = self.stride;
        self.sums[y1 * s + x1] + self.sums[y0 * s + x0] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0]
    }
}

/// Binarizes a unit-interval grid against the mean of the `window x window`
/// neighbourhood of each pixel, clipped to the image.
pub fn adaptive_threshold(grid: &Grid<f32>, window: usize, t: f64) -> Result<BinaryMask> {
    check_params(window, t)?;
    let (w, h) = (grid.width(), grid.height());
    let q: Vec<u64> = grid.as_slice().iter().map(|&v| quantize_unit(v)).collect();
    let table = IntegralImage::new(&q, w, h);
    let r = window / 2;
    let mut bits = Vec::with_capacity(w * h);
    for y in 0..h {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(r);
            let x1 = (x + r + 1).min(w);
            let count = ((x1 - x0) * (y1 - y0)) as u64;
            let sum = table.sum(x0, y0, x1, y1);
            bits.push(is_foreground(q[y * w + x], sum, count, t));
        }
    }
    BinaryMask::new(w, h, bits)
}
