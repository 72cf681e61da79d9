//! Evaluation reports: an aligned plain-text table for people and JSON rows
//! for programs.

use std::fmt::Write;

use echofinder_core::eval::{metrics_from_counts, Counts, MetricRow};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub iou_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ReportRow {
    pub fn new(counts: Counts, iou_threshold: f64) -> Self {
        let m = metrics_from_counts(counts, iou_threshold);
        Self {
            iou_threshold,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            tp: counts.tp,
            fp: counts.fp,
            fn_: counts.fn_,
        }
    }

    pub fn metrics(&self) -> MetricRow {
        MetricRow {
            iou_threshold: self.iou_threshold,
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// What was evaluated: a detection file or a model.
    pub source: String,
    pub n_echograms: usize,
    pub n_ground_truth: usize,
    pub rows: Vec<ReportRow>,
}

impl Report {
    /// Aligned table with one row per IoU threshold.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} ({} echograms, {} schools)", self.source, self.n_echograms, self.n_ground_truth);
        let _ = writeln!(
            s,
            "{:>6}  {:>9}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}",
            "IoU", "Precision", "Recall", "F1", "TP", "FP", "FN"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>6.2}  {:>9.3}  {:>6.3}  {:>6.3}  {:>6}  {:>6}  {:>6}",
                r.iou_threshold, r.precision, r.recall, r.f1, r.tp, r.fp, r.fn_
            );
        }
        s
    }
}
