//! Region-of-interest extraction.
//!
//! Every channel is normalized, median-filtered along time, binarized
//! against its local mean, then opened and closed. The per-channel masks
//! vote pixel-wise; pixels with enough votes form 8-connected components,
//! which are kept when large enough and steep enough.

mod median;
mod morphology;
mod threshold;

pub use median::median_filter_time;
pub use morphology::{dilate, erode, morph_close, morph_open};
pub use threshold::{adaptive_threshold, is_foreground, quantize_unit};

use alloc::vec::Vec;

use crate::echogram::{normalize_with, Echogram, Grid, SvWindow};
use crate::error::{invalid, Error, Result};
use crate::geometry::BoundingBox;
use crate::mask::{BinaryMask, ScoreMatrix};
use crate::region::{connected_components, LabeledRegion};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Tunables of the extractor. `Default` is the shipped configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RoiConfig {
    /// Sv window used for normalization.
    pub sv_window: SvWindow,
    /// Odd median kernel length along time, in pixels.
    pub median_len: usize,
    /// Odd side of the adaptive-threshold window, in pixels.
    pub thresh_window: usize,
    /// Fractional offset `t` of the adaptive threshold.
    pub thresh_offset: f64,
    /// Radius of the square structuring element.
    pub morph_radius: usize,
    /// Minimum number of channels that must agree on a pixel.
    pub min_consensus: usize,
    /// Components smaller than this are discarded.
    pub min_area_px: usize,
    /// Components flatter than this angle from horizontal are discarded.
    pub min_orientation_deg: f64,
}

impl Default for RoiConfig {
    fn default() -> Self {
        Self {
            sv_window: SvWindow::default(),
            median_len: 5,
            thresh_window: 61,
            thresh_offset: 0.15,
            morph_radius: 1,
            min_consensus: 3,
            min_area_px: 50,
            min_orientation_deg: 60.0,
        }
    }
}

impl RoiConfig {
    pub fn validate(&self, n_channels: usize) -> Result<()> {
        self.sv_window.validate()?;
        if self.median_len == 0 || self.median_len % 2 == 0 {
            return Err(invalid("median_len", "must be a positive odd length"));
        }
        threshold::check_params(self.thresh_window, self.thresh_offset)?;
        if self.morph_radius == 0 {
            return Err(invalid("morph_radius", "must be at least 1"));
        }
        if self.min_consensus == 0 || self.min_consensus > n_channels {
            return Err(invalid("min_consensus", "must lie in [1, n_channels]"));
        }
        if self.min_area_px == 0 {
            return Err(invalid("min_area_px", "must be at least 1"));
        }
        if !(0.0..=90.0).contains(&self.min_orientation_deg) {
            return Err(invalid("min_orientation_deg", "must lie in [0, 90]"));
        }
        Ok(())
    }
}

/// Keeps pixels set in at least `min_consensus` of the masks.
pub fn channel_consensus(masks: &[BinaryMask], min_consensus: usize) -> Result<BinaryMask> {
    if masks.is_empty() {
        return Err(Error::Empty("mask list"));
    }
    if min_consensus == 0 || min_consensus > masks.len() {
        return Err(invalid("min_consensus", "must lie in [1, number of masks]"));
    }
    Ok(ScoreMatrix::from_masks(masks)?.at_least(min_consensus))
}

/// Drops components below the area or orientation thresholds; both
/// thresholds are inclusive. Order is preserved.
pub fn filter_components(regions: Vec<LabeledRegion>, cfg: &RoiConfig) -> Vec<LabeledRegion> {
    regions
        .into_iter()
        .filter(|r| r.pixel_count() >= cfg.min_area_px && r.orientation_deg() >= cfg.min_orientation_deg)
        .collect()
}

/// Binarized and cleaned mask of one normalized channel.
pub fn channel_mask(channel: &Grid<f32>, cfg: &RoiConfig) -> Result<BinaryMask> {
    let smooth = median_filter_time(channel, cfg.median_len)?;
    let bin = adaptive_threshold(&smooth, cfg.thresh_window, cfg.thresh_offset)?;
    let opened = morph_open(&bin, cfg.morph_radius)?;
    morph_close(&opened, cfg.morph_radius)
}

/// Runs the pipeline on already-normalized channels and returns the
/// surviving components.
pub fn extract_regions_normalized(channels: &[Grid<f32>], cfg: &RoiConfig) -> Result<Vec<LabeledRegion>> {
    cfg.validate(channels.len())?;
    let masks = channels
        .iter()
        .map(|c| channel_mask(c, cfg))
        .collect::<Result<Vec<_>>>()?;
    let consensus = channel_consensus(&masks, cfg.min_consensus)?;
    Ok(filter_components(connected_components(&consensus), cfg))
}

/// Runs the full pipeline on an echogram and returns the surviving components.
pub fn extract_regions(e: &Echogram, cfg: &RoiConfig) -> Result<Vec<LabeledRegion>> {
    cfg.validate(e.n_channels())?;
    extract_regions_normalized(&normalize_with(e, &cfg.sv_window), cfg)
}

/// ROI bounding boxes of an echogram.
pub fn extract_rois(e: &Echogram, cfg: &RoiConfig) -> Result<Vec<BoundingBox>> {
    Ok(extract_regions(e, cfg)?.into_iter().map(|r| r.bbox).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn mask_with(w: usize, h: usize, on: &[(usize, usize)]) -> BinaryMask {
        let mut m = BinaryMask::empty(w, h);
        for &(x, y) in on {
            m.set(x, y, true);
        }
        m
    }

    #[test]
    fn three_of_four_votes_kept() {
        let hit = mask_with(2, 1, &[(0, 0)]);
        let miss = BinaryMask::empty(2, 1);
        let out = channel_consensus(&[hit.clone(), hit.clone(), hit.clone(), miss.clone()], 3).unwrap();
        assert!(out.get(0, 0));
        let out = channel_consensus(&[hit.clone(), hit, miss.clone(), miss], 3).unwrap();
        assert!(!out.get(0, 0));
    }

    #[test]
    fn single_mask_min_one_is_identity() {
        let m = mask_with(3, 3, &[(0, 0), (2, 1)]);
        assert_eq!(channel_consensus(std::slice::from_ref(&m), 1).unwrap(), m);
    }

    #[test]
    fn consensus_errors() {
        assert!(channel_consensus(&[], 1).is_err());
        let a = BinaryMask::empty(2, 2);
        let b = BinaryMask::empty(3, 2);
        assert!(channel_consensus(&[a.clone(), b], 1).is_err());
        assert!(channel_consensus(std::slice::from_ref(&a), 2).is_err());
        assert!(channel_consensus(&[a], 0).is_err());
    }

    fn bar(w: u32, h: u32) -> LabeledRegion {
        LabeledRegion::from_pixels((0..h).flat_map(|y| (0..w).map(move |x| [x, y])).collect())
    }

    #[test]
    fn small_region_discarded() {
        let cfg = RoiConfig::default();
        // 7 x 7 = 49 pixels, isotropic so orientation passes.
        assert!(filter_components(vec![bar(7, 7)], &cfg).is_empty());
        assert_eq!(filter_components(vec![bar(5, 10)], &cfg).len(), 1);
    }

    #[test]
    fn horizontal_bar_discarded_vertical_kept() {
        let cfg = RoiConfig::default();
        assert!(filter_components(vec![bar(30, 3)], &cfg).is_empty());
        let kept = filter_components(vec![bar(3, 30)], &cfg);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].orientation_deg(), 90.0);
    }

    #[test]
    fn thresholds_inclusive() {
        let mut cfg = RoiConfig::default();
        cfg.min_area_px = 50;
        assert_eq!(filter_components(vec![bar(5, 10)], &cfg).len(), 1);
        // A 45 degree diagonal survives a 45 degree threshold.
        cfg.min_area_px = 1;
        cfg.min_orientation_deg = 45.0;
        let diag = LabeledRegion::from_pixels((0..8).map(|i| [i, i]).collect());
        assert_eq!(filter_components(vec![diag], &cfg).len(), 1);
    }

    #[test]
    fn config_validation() {
        let ok = RoiConfig::default();
        assert!(ok.validate(4).is_ok());
        assert!(ok.validate(2).is_err());
        for bad in [
            RoiConfig { median_len: 4, ..ok.clone() },
            RoiConfig { thresh_window: 2, ..ok.clone() },
            RoiConfig { thresh_offset: 1.5, ..ok.clone() },
            RoiConfig { morph_radius: 0, ..ok.clone() },
            RoiConfig { min_area_px: 0, ..ok.clone() },
            RoiConfig { min_orientation_deg: 91.0, ..ok.clone() },
        ] {
            assert!(bad.validate(4).is_err());
        }
    }
}
