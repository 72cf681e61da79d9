//! Detection scoring: IoU matching, precision/recall/F1, threshold sweeps
//! and end-to-end framework evaluation.

use alloc::vec::Vec;
use core::borrow::Borrow;
use core::ops::{Add, AddAssign};

use crate::classify::RoiClassifier;
use crate::echogram::{normalize_with, Echogram};
use crate::error::{invalid, Result};
use crate::geometry::{iou, Annotation, BoundingBox};
use crate::roi::{extract_regions_normalized, RoiConfig};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// One accepted detection/ground-truth pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub det: usize,
    pub gt: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

impl core::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), Add::add)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub pairs: Vec<MatchedPair>,
}

impl MatchResult {
    pub fn counts(&self) -> Counts {
        Counts {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
        }
    }
}

/// Precision, recall and F1 at one IoU threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MetricRow {
    pub iou_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Greedy one-to-one matching. Candidate pairs need IoU strictly above
/// `tau`; they are accepted in order of decreasing IoU, ties broken by the
/// detection box, then the ground-truth box (lexicographic `x, y, w, h`),
/// so counts do not depend on input order.
pub fn match_detections(dets: &[BoundingBox], gt: &[BoundingBox], tau: f64) -> MatchResult {
    let mut cands = Vec::new();
    for (d, db) in dets.iter().enumerate() {
        for (g, gb) in gt.iter().enumerate() {
            let v = iou(db, gb);
            if v > tau {
                cands.push(MatchedPair { det: d, gt: g, iou: v });
            }
        }
    }
    cands.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then_with(|| dets[a.det].cmp(&dets[b.det]))
            .then_with(|| gt[a.gt].cmp(&gt[b.gt]))
            .then_with(|| a.det.cmp(&b.det))
            .then_with(|| a.gt.cmp(&b.gt))
    });
    let mut det_used = alloc::vec![false; dets.len()];
    let mut gt_used = alloc::vec![false; gt.len()];
    let mut pairs = Vec::new();
    for p in cands {
        if !det_used[p.det] && !gt_used[p.gt] {
            det_used[p.det] = true;
            gt_used[p.gt] = true;
            pairs.push(p);
        }
    }
    let tp = pairs.len();
    MatchResult {
        threshold: tau,
        tp,
        fp: dets.len() - tp,
        fn_: gt.len() - tp,
        pairs,
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// F1 from precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn metrics_from_counts(c: Counts, iou_threshold: f64) -> MetricRow {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    MetricRow {
        iou_threshold,
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

pub fn precision_recall_f1(m: &MatchResult) -> MetricRow {
    metrics_from_counts(m.counts(), m.threshold)
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(invalid("iou thresholds", "must lie in [0, 1]"));
    }
    if taus.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("iou thresholds", "must be sorted ascending"));
    }
    Ok(())
}

/// One metric row per threshold for a single detection/ground-truth pair.
pub fn sweep_thresholds(dets: &[BoundingBox], gt: &[BoundingBox], taus: &[f64]) -> Result<Vec<MetricRow>> {
    check_taus(taus)?;
    Ok(taus
        .iter()
        .map(|&t| precision_recall_f1(&match_detections(dets, gt, t)))
        .collect())
}

/// Micro-averaged sweep over many scenes: counts are summed across scenes
/// before metrics are computed.
pub fn sweep_dataset<D, G>(scenes: &[(D, G)], taus: &[f64]) -> Result<Vec<MetricRow>>
where
    D: AsRef<[BoundingBox]>,
    G: AsRef<[BoundingBox]>,
{
    check_taus(taus)?;
    Ok(taus
        .iter()
        .map(|&t| {
            let total: Counts = scenes
                .iter()
                .map(|(d, g)| match_detections(d.as_ref(), g.as_ref(), t).counts())
                .sum();
            metrics_from_counts(total, t)
        })
        .collect())
}

/// Extracts ROIs from one echogram and classifies each of them.
pub fn detect<C: RoiClassifier + ?Sized>(e: &Echogram, cfg: &RoiConfig, model: &C) -> Result<Vec<Annotation>> {
    cfg.validate(e.n_channels())?;
    let channels = normalize_with(e, &cfg.sv_window);
    let regions = extract_regions_normalized(&channels, cfg)?;
    let labels = model.classify_all(&channels, &regions)?;
    Ok(regions
        .iter()
        .zip(labels)
        .map(|(r, label)| Annotation { bbox: r.bbox, label })
        .collect())
}

/// Boxes classified as schools.
pub fn positive_boxes(detections: &[Annotation]) -> Vec<BoundingBox> {
    detections.iter().filter(|a| a.label.is_positive()).map(|a| a.bbox).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchogramEvaluation {
    /// Every ROI with its predicted label.
    pub detections: Vec<Annotation>,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameworkReport {
    pub overall: MetricRow,
    pub counts: Counts,
    pub per_echogram: Vec<EchogramEvaluation>,
}

/// Runs extraction and classification on every scene, matches the
/// positively classified boxes against ground truth at `tau`, and
/// micro-averages.
pub fn evaluate_framework<C, I, E, G>(scenes: I, cfg: &RoiConfig, model: &C, tau: f64) -> Result<FrameworkReport>
where
    C: RoiClassifier + ?Sized,
    I: IntoIterator<Item = (E, G)>,
    E: Borrow<Echogram>,
    G: AsRef<[BoundingBox]>,
{
    check_taus(&[tau])?;
    let mut per_echogram = Vec::new();
    for (e, gt) in scenes {
        let detections = detect(e.borrow(), cfg, model)?;
        let counts = match_detections(&positive_boxes(&detections), gt.as_ref(), tau).counts();
        per_echogram.push(EchogramEvaluation { detections, counts });
    }
    let counts: Counts = per_echogram.iter().map(|p| p.counts).sum();
    Ok(FrameworkReport {
        overall: metrics_from_counts(counts, tau),
        counts,
        per_echogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn bx(x: u32, y: u32, w: u32, h: u32) -> BoundingBox {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn identical_lists_match_fully() {
        let gt = vec![bx(0, 0, 10, 10), bx(20, 0, 5, 5), bx(40, 40, 3, 9)];
        let m = match_detections(&gt, &gt, 0.4);
        assert_eq!((m.tp, m.fp, m.fn_), (3, 0, 0));
    }

    #[test]
    fn one_detection_two_ground_truths() {
        // det (0,0,10,10) against (0,0,10,6): 60/100 = 0.6,
        // against (5,0,5,10): 50/100 = 0.5.
        let det = [bx(0, 0, 10, 10)];
        let gt = [bx(5, 0, 5, 10), bx(0, 0, 10, 6)];
        assert!((iou(&det[0], &gt[1]) - 0.6).abs() < 1e-12);
        assert!((iou(&det[0], &gt[0]) - 0.5).abs() < 1e-12);
        let m = match_detections(&det, &gt, 0.4);
        assert_eq!((m.tp, m.fp, m.fn_), (1, 0, 1));
        assert_eq!(m.pairs[0].gt, 1);
    }

    #[test]
    fn iou_equal_to_threshold_is_not_a_match() {
        let m = match_detections(&[bx(0, 0, 4, 10)], &[bx(0, 0, 10, 10)], 0.4);
        assert_eq!((m.tp, m.fp, m.fn_), (0, 1, 1));
    }

    #[test]
    fn metric_arithmetic() {
        let r = metrics_from_counts(Counts { tp: 5, fp: 3, fn_: 2 }, 0.4);
        assert_eq!(r.precision, 0.625);
        assert!((r.recall - 5.0 / 7.0).abs() < 1e-15);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_scene_is_all_zero() {
        let r = metrics_from_counts(Counts::default(), 0.0);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn unsorted_thresholds_rejected() {
        assert!(sweep_thresholds(&[], &[], &[0.4, 0.2]).is_err());
    }

    #[test]
    fn empty_detections_sweep_to_zero() {
        let rows = sweep_thresholds(&[], &[bx(0, 0, 3, 3)], &[0.0, 0.2, 0.4]).unwrap();
        assert!(rows.iter().all(|r| r.precision == 0.0 && r.recall == 0.0));
    }

    #[test]
    fn perfect_detections_sweep_to_one() {
        let gt = [bx(0, 0, 3, 3), bx(10, 10, 2, 8)];
        for r in sweep_thresholds(&gt, &gt, &[0.0, 0.2, 0.4, 0.99]).unwrap() {
            assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        }
    }
}
