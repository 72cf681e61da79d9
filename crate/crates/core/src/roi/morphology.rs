//! Binary opening and closing with a `(2r+1) x (2r+1)` square element.
//!
//! Pixels outside the image are neutral: they count as foreground for
//! erosion and as background for dilation. With this pairing erosion and
//! dilation stay adjoint on the image domain, so opening is anti-extensive,
//! closing is extensive, and both are idempotent right up to the border.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::mask::BinaryMask;

#[derive(Clone, Copy, PartialEq)]
enum Op {
    Erode,
    Dilate,
}

fn check_radius(r: usize) -> Result<()> {
    if r == 0 {
        return Err(invalid("morph_radius", "must be at least 1"));
    }
    Ok(())
}

/// 1-D pass over `len` samples read through `get`, written through `put`.
fn pass_1d(
    len: usize,
    r: usize,
    op: Op,
    prefix: &mut Vec<u32>,
    get: impl Fn(usize) -> bool,
    mut put: impl FnMut(usize, bool),
) {
    // prefix[i] counts background samples (erode) or foreground samples
    // (dilate) in [0, i).
    prefix.clear();
    prefix.push(0);
    let mut acc = 0u32;
    for i in 0..len {
        let v = get(i);
        acc += match op {
            Op::Erode => !v as u32,
            Op::Dilate => v as u32,
        };
        prefix.push(acc);
    }
    for i in 0..len {
        let lo = i.saturating_sub(r);
        let hi = (i + r + 1).min(len);
        let hits = prefix[hi] - prefix[lo];
        put(
            i,
            match op {
                Op::Erode => hits == 0,
                Op::Dilate => hits > 0,
            },
        );
    }
}

fn apply(m: &BinaryMask, r: usize, op: Op) -> BinaryMask {
    let (w, h) = (m.width(), m.height());
    let mut tmp = BinaryMask::empty(w, h);
    let mut out = BinaryMask::empty(w, h);
    let mut prefix = Vec::with_capacity(w.max(h) + 1);
    for y in 0..h {
        pass_1d(w, r, op, &mut prefix, |x| m.get(x, y), |x, v| tmp.set(x, y, v));
    }
    for x in 0..w {
        pass_1d(h, r, op, &mut prefix, |y| tmp.get(x, y), |y, v| out.set(x, y, v));
    }
    out
}

pub fn erode(m: &BinaryMask, r: usize) -> Result<BinaryMask> {
    check_radius(r)?;
    Ok(apply(m, r, Op::Erode))
}

pub fn dilate(m: &BinaryMask, r: usize) -> Result<BinaryMask> {
    check_radius(r)?;
    Ok(apply(m, r, Op::Dilate))
}

/// Erosion followed by dilation; removes protrusions and isthmuses thinner
/// than the element.
pub fn morph_open(m: &BinaryMask, r: usize) -> Result<BinaryMask> {
    check_radius(r)?;
    Ok(apply(&apply(m, r, Op::Erode), r, Op::Dilate))
}

/// Dilation followed by erosion; fills holes and gaps smaller than the element.
pub fn morph_close(m: &BinaryMask, r: usize) -> Result<BinaryMask> {
    check_radius(r)?;
    Ok(apply(&apply(m, r, Op::Dilate), r, Op::Erode))
}
