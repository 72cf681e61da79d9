use alloc::vec::Vec;

use crate::echogram::Grid;
use crate::error::{invalid, Result};

/// Median of the `k`-long horizontal (time-axis) window centred on each
/// pixel, with replicate padding at the row ends. `k = 1` is the identity.
pub fn median_filter_time(grid: &Grid<f32>, k: usize) -> Result<Grid<f32>> {
    if k == 0 || k % 2 == 0 {
        return Err(invalid("median_len", "must be a positive odd length"));
    }
    if k == 1 {
        return Ok(grid.clone());
    }
    let (w, h) = (grid.width(), grid.height());
    let r = (k / 2) as isize;
    let mut out = Vec::with_capacity(w * h);
    let mut window = alloc::vec![0.0f32; k];
    for y in 0..h {
        let row = grid.row(y);
        for x in 0..w {
            for (i, slot) in window.iter_mut().enumerate() {
                let sx = (x as isize + i as isize - r).clamp(0, w as isize - 1);
                *slot = row[sx as usize];
            }
            let (_, m, _) = window.select_nth_unstable_by(k / 2, f32::total_cmp);
            out.push(*m);
        }
    }
    Grid::new(w, h, out)
}
