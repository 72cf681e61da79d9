//! Axis-aligned pixel boxes and class labels.
//!
//! Boxes live on the inclusive integer pixel grid: a box with `w = h = 1`
//! covers exactly one pixel and has area 1.

use crate::error::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle in pixel coordinates, origin at the top-left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    /// Builds a box, rejecting zero width or height.
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::InvalidBox);
        }
        x.checked_add(w).ok_or(Error::InvalidBox)?;
        y.checked_add(h).ok_or(Error::InvalidBox)?;
        Ok(Self { x, y, w, h })
    }

    /// Smallest box covering the inclusive pixel range `[x0, x1] x [y0, y1]`.
    pub fn from_corners(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        Self {
            x: x0,
            y: y0,
            w: x1 - x0 + 1,
            h: y1 - y0 + 1,
        }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    /// Exclusive right edge.
    pub fn right(&self) -> u64 {
        u64::from(self.x) + u64::from(self.w)
    }

    /// Exclusive bottom edge.
    pub fn bottom(&self) -> u64 {
        u64::from(self.y) + u64::from(self.h)
    }

    pub fn is_valid(&self) -> bool {
        self.w >= 1 && self.h >= 1
    }

    /// True when the box lies entirely inside a `width x height` image.
    pub fn fits_within(&self, width: usize, height: usize) -> bool {
        self.is_valid() && self.right() <= width as u64 && self.bottom() <= height as u64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && y >= self.y && u64::from(x) < self.right() && u64::from(y) < self.bottom()
    }

    pub fn intersection_area(&self, other: &Self) -> u64 {
        let x0 = self.x.max(other.x) as u64;
        let y0 = self.y.max(other.y) as u64;
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            (x1 - x0) * (y1 - y0)
        }
    }

    /// True when the boxes share at least one pixel.
    pub fn overlaps(&self, other: &Self) -> bool {
        self.intersection_area(other) > 0
    }

    /// Grows the box by `margin` pixels on every side, saturating at zero.
    pub fn expanded(&self, margin: u32) -> Self {
        let x = self.x.saturating_sub(margin);
        let y = self.y.saturating_sub(margin);
        Self {
            x,
            y,
            w: (self.x - x) + self.w + margin,
            h: (self.y - y) + self.h + margin,
        }
    }

    pub fn iou(&self, other: &Self) -> f64 {
        iou(self, other)
    }
}

/// Intersection over union of two boxes; 0 when they are disjoint.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Closed class set for annotations and classifier output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Label {
    Background,
    HerringSchool,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::HerringSchool
    }

    pub fn from_positive(positive: bool) -> Self {
        if positive {
            Label::HerringSchool
        } else {
            Label::Background
        }
    }

    /// Class index used by the network output (0 = background).
    pub fn index(self) -> usize {
        match self {
            Label::Background => 0,
            Label::HerringSchool => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Background => "background",
            Label::HerringSchool => "herring-school",
        }
    }
}

impl core::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "background" => Ok(Label::Background),
            "herring-school" => Ok(Label::HerringSchool),
            _ => Err(crate::error::invalid("label", "unknown class tag")),
        }
    }
}

impl core::fmt::Display for Label {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A labelled box, used for ground truth and classified detections alike.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Annotation {
    pub bbox: BoundingBox,
    pub label: Label,
}

impl Annotation {
    pub fn school(bbox: BoundingBox) -> Self {
        Self {
            bbox,
            label: Label::HerringSchool,
        }
    }
}
