//! Turning extractor output and ground truth into labelled training crops.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::features::{extract_features, FeatureVector};
use crate::echogram::{normalize_with, Echogram, Grid};
use crate::error::{invalid, Error, Result};
use crate::geometry::{iou, BoundingBox, Label};
use crate::roi::{extract_regions_normalized, RoiConfig};

/// IoU below which an ROI becomes a negative sample.
pub const DEFAULT_NEGATIVE_IOU: f64 = 0.4;
/// Negatives kept per positive.
pub const DEFAULT_NEG_PER_POS: f64 = 2.0;
pub const DEFAULT_CROP_SIZE: usize = 32;

/// An ROI with its mining label and its best overlap with ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledRoi {
    pub bbox: BoundingBox,
    pub label: Label,
    pub best_iou: f64,
}

/// Labels each ROI positive when its best IoU against `gt` is at least
/// `tau`, negative otherwise. An empty `gt` makes every ROI negative.
pub fn label_rois(rois: &[BoundingBox], gt: &[BoundingBox], tau: f64) -> Vec<LabeledRoi> {
    rois.iter()
        .map(|r| {
            let best_iou = gt.iter().map(|g| iou(r, g)).fold(0.0, f64::max);
            LabeledRoi {
                bbox: *r,
                label: Label::from_positive(best_iou >= tau),
                best_iou,
            }
        })
        .collect()
}

/// Indices retained by class balancing: every positive, then a seeded
/// uniform draw without replacement of `min(N, floor(ratio * P))`
/// negatives. Both groups keep their original relative order.
pub fn balance_indices(labels: &[Label], ratio_neg_per_pos: f64, seed: u64) -> Vec<usize> {
    let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_positive()).collect();
    let negatives: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].is_positive()).collect();
    let quota = libm::floor(ratio_neg_per_pos.max(0.0) * positives.len() as f64) as usize;
    let take = quota.min(negatives.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, negatives.len(), take).into_vec();
    chosen.sort_unstable();
    let mut out = positives;
    out.extend(chosen.into_iter().map(|i| negatives[i]));
    out
}

/// Fixed-size multi-channel crop, channel-major then row-major, values in
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Crop {
    pub channels: usize,
    pub size: usize,
    pub data: Vec<f32>,
}

impl Crop {
    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.size * self.size;
        &self.data[c * n..(c + 1) * n]
    }
}

fn sample_positions(n_src: usize, n_dst: usize) -> Vec<(usize, usize, f64)> {
    (0..n_dst)
        .map(|i| {
            let s = if n_dst == 1 {
                0.0
            } else {
                i as f64 * (n_src - 1) as f64 / (n_dst - 1) as f64
            };
            let i0 = (libm::floor(s) as usize).min(n_src - 1);
            let i1 = (i0 + 1).min(n_src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Extracts `bbox` from every normalized channel and resamples it to
/// `size x size` by bilinear interpolation with corner-aligned sampling.
/// Nothing outside the box contributes.
pub fn crop_roi(channels: &[Grid<f32>], bbox: &BoundingBox, size: usize) -> Result<Crop> {
    let first = channels.first().ok_or(Error::Empty("channel list"))?;
    if size < 8 {
        return Err(invalid("crop size", "must be at least 8"));
    }
    if !bbox.fits_within(first.width(), first.height()) {
        return Err(Error::InvalidBox);
    }
    let xs = sample_positions(bbox.w as usize, size);
    let ys = sample_positions(bbox.h as usize, size);
    let (bx, by) = (bbox.x as usize, bbox.y as usize);
    let mut data = Vec::with_capacity(channels.len() * size * size);
    for g in channels {
        if !g.same_shape(first) {
            return Err(invalid("channels", "channel grids differ in shape"));
        }
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let p = |x: usize, y: usize| f64::from(g.get(bx + x, by + y));
                let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
                let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
                data.push((top * (1.0 - fy) + bottom * fy) as f32);
            }
        }
    }
    Ok(Crop {
        channels: channels.len(),
        size,
        data,
    })
}

/// A mined training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub crop: Crop,
    pub label: Label,
    pub source_box: BoundingBox,
    pub iou_with_gt: f64,
    /// Hand-crafted features of the underlying component, for the linear
    /// baseline.
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiningConfig {
    pub roi: RoiConfig,
    pub negative_iou: f64,
    pub crop_size: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            roi: RoiConfig::default(),
            negative_iou: DEFAULT_NEGATIVE_IOU,
            crop_size: DEFAULT_CROP_SIZE,
        }
    }
}

/// Runs the extractor on one echogram and turns every ROI into a sample,
/// labelled against `gt`. No balancing is applied.
pub fn mine_echogram(e: &Echogram, gt: &[BoundingBox], cfg: &MiningConfig) -> Result<Vec<Sample>> {
    if !(0.0..=1.0).contains(&cfg.negative_iou) {
        return Err(invalid("negative_iou", "must lie in [0, 1]"));
    }
    cfg.roi.validate(e.n_channels())?;
    let channels = normalize_with(e, &cfg.roi.sv_window);
    let regions = extract_regions_normalized(&channels, &cfg.roi)?;
    let boxes: Vec<BoundingBox> = regions.iter().map(|r| r.bbox).collect();
    let labelled = label_rois(&boxes, gt, cfg.negative_iou);
    regions
        .iter()
        .zip(labelled)
        .map(|(region, l)| {
            Ok(Sample {
                crop: crop_roi(&channels, &l.bbox, cfg.crop_size)?,
                label: l.label,
                source_box: l.bbox,
                iou_with_gt: l.best_iou,
                features: extract_features(&region.pixels, &channels)?,
            })
        })
        .collect()
}

/// Keeps all positives and a seeded subset of negatives; see
/// [`balance_indices`].
pub fn balance_samples(samples: Vec<Sample>, ratio_neg_per_pos: f64, seed: u64) -> Result<Vec<Sample>> {
    if !(ratio_neg_per_pos >= 0.0) {
        return Err(invalid("ratio", "must be non-negative"));
    }
    let labels: Vec<Label> = samples.iter().map(|s| s.label).collect();
    let keep = balance_indices(&labels, ratio_neg_per_pos, seed);
    let mut slots: Vec<Option<Sample>> = samples.into_iter().map(Some).collect();
    Ok(keep.into_iter().filter_map(|i| slots[i].take()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn bx(x: u32, y: u32, w: u32, h: u32) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn boundary_iou_is_positive() {
        // 40 / 100 overlap against a 10x10 ground truth.
        let gt = [bx(0, 0, 10, 10)];
        let at = label_rois(&[bx(0, 0, 4, 10)], &gt, 0.4);
        assert_eq!(at[0].best_iou, 0.4);
        assert_eq!(at[0].label, Label::HerringSchool);
        let below = label_rois(&[bx(0, 0, 4, 10)], &gt, 0.41);
        assert_eq!(below[0].label, Label::Background);
    }

    #[test]
    fn identical_roi_positive_with_unit_iou() {
        let l = label_rois(&[bx(3, 3, 5, 5)], &[bx(3, 3, 5, 5)], 0.4);
        assert_eq!(l[0].best_iou, 1.0);
        assert!(l[0].label.is_positive());
    }

    #[test]
    fn empty_ground_truth_gives_negatives() {
        let l = label_rois(&[bx(0, 0, 2, 2), bx(5, 5, 2, 2)], &[], 0.4);
        assert!(l.iter().all(|r| r.label == Label::Background && r.best_iou == 0.0));
    }

    fn labels(pos: usize, neg: usize) -> Vec<Label> {
        let mut v = vec![Label::HerringSchool; pos];
        v.extend(vec![Label::Background; neg]);
        v
    }

    #[test]
    fn balance_counts() {
        assert_eq!(balance_indices(&labels(10, 50), 2.0, 1).len(), 30);
        assert_eq!(balance_indices(&labels(10, 5), 2.0, 1).len(), 15);
        assert!(balance_indices(&labels(0, 9), 2.0, 1).is_empty());
    }

    #[test]
    fn balance_keeps_order_and_is_seeded() {
        let mut l = labels(3, 20);
        l.rotate_left(7);
        let a = balance_indices(&l, 2.0, 42);
        assert_eq!(a, balance_indices(&l, 2.0, 42));
        let (pos, neg) = a.split_at(3);
        assert!(pos.iter().all(|&i| l[i].is_positive()));
        assert!(neg.iter().all(|&i| !l[i].is_positive()));
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(neg.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn crop_same_size_is_identity() {
        let g = Grid::from_fn(12, 10, |x, y| ((x * 7 + y * 3) % 11) as f32 / 10.0);
        let c = crop_roi(std::slice::from_ref(&g), &bx(2, 1, 8, 8), 8).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(c.data[y * 8 + x], g.get(x + 2, y + 1));
            }
        }
    }

    #[test]
    fn constant_box_gives_constant_crop() {
        let g = Grid::filled(40, 40, 0.625f32);
        let c = crop_roi(&[g.clone(), g], &bx(3, 5, 13, 29), 16).unwrap();
        assert_eq!(c.data.len(), 2 * 16 * 16);
        assert!(c.data.iter().all(|&v| v == 0.625));
    }

    #[test]
    fn checkerboard_upsampling_matches_hand_values() {
        // 2x2 [[0, 1], [1, 0]] at sample points {0, 1/3, 2/3, 1} per axis:
        // v(s, t) = s + t - 2 s t.
        let g = Grid::new(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let mut big = Grid::filled(10, 10, 0.0f32);
        for y in 0..2 {
            for x in 0..2 {
                big.set(x + 4, y + 4, g.get(x, y));
            }
        }
        let c = crop_roi(&[big], &bx(4, 4, 2, 2), 8).unwrap();
        for (j, row) in c.data.chunks(8).enumerate() {
            for (i, &v) in row.iter().enumerate() {
                let (s, t) = (i as f64 / 7.0, j as f64 / 7.0);
                let expected = s + t - 2.0 * s * t;
                assert!((f64::from(v) - expected).abs() < 1e-6, "({i},{j}) {v} vs {expected}");
            }
        }
    }

    #[test]
    fn crop_rejects_out_of_bounds_and_small_size() {
        let g = Grid::filled(10, 10, 0.0f32);
        assert_eq!(crop_roi(std::slice::from_ref(&g), &bx(5, 5, 6, 2), 8), Err(Error::InvalidBox));
        assert!(crop_roi(&[g], &bx(0, 0, 2, 2), 7).is_err());
    }
}
