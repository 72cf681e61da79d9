//! ROI classifiers: a hand-crafted-feature linear SVM baseline and a small
//! trainable CNN.

pub mod cnn;
pub mod features;
pub mod gradcheck;
pub mod linear;

use alloc::vec::Vec;

use crate::echogram::Grid;
use crate::error::Result;
use crate::geometry::Label;
use crate::mining::crop_roi;
use crate::region::LabeledRegion;

pub use cnn::{cnn_backward, cnn_forward, train_cnn, Cnn, CnnModel, CnnParams, CnnShape, CnnTraining};
pub use features::{extract_features, FeatureVector};
pub use linear::{predict_linear, train_linear, LinearModel, LinearParams, LinearTraining};

/// Decides whether an extracted region is a school.
pub trait RoiClassifier {
    /// `channels` are the normalized echogram channels the region was
    /// extracted from.
    fn classify(&self, channels: &[Grid<f32>], region: &LabeledRegion) -> Result<Label>;

    fn classify_all(&self, channels: &[Grid<f32>], regions: &[LabeledRegion]) -> Result<Vec<Label>> {
        regions.iter().map(|r| self.classify(channels, r)).collect()
    }
}

/// Either kind of trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Cnn(CnnModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Linear(_) => "svm",
            Model::Cnn(_) => "cnn",
        }
    }
}

impl RoiClassifier for LinearModel {
    fn classify(&self, channels: &[Grid<f32>], region: &LabeledRegion) -> Result<Label> {
        Ok(self.predict(&extract_features(&region.pixels, channels)?).0)
    }
}

impl RoiClassifier for CnnModel {
    fn classify(&self, channels: &[Grid<f32>], region: &LabeledRegion) -> Result<Label> {
        Ok(self.classify_all(channels, core::slice::from_ref(region))?[0])
    }

    fn classify_all(&self, channels: &[Grid<f32>], regions: &[LabeledRegion]) -> Result<Vec<Label>> {
        let size = self.shape.input_size;
        let mut batch = Vec::with_capacity(regions.len() * self.shape.input_len());
        for r in regions {
            batch.extend_from_slice(&crop_roi(channels, &r.bbox, size)?.data);
        }
        self.predict(&batch, regions.len())
    }
}

impl RoiClassifier for Model {
    fn classify(&self, channels: &[Grid<f32>], region: &LabeledRegion) -> Result<Label> {
        match self {
            Model::Linear(m) => m.classify(channels, region),
            Model::Cnn(m) => m.classify(channels, region),
        }
    }

    fn classify_all(&self, channels: &[Grid<f32>], regions: &[LabeledRegion]) -> Result<Vec<Label>> {
        match self {
            Model::Linear(m) => m.classify_all(channels, regions),
            Model::Cnn(m) => m.classify_all(channels, regions),
        }
    }
}
