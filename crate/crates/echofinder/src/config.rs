//! Pipeline configuration files (TOML).
//!
//! Every section is optional and every field defaults:
//!
//! ```toml
//! [roi]
//! min_area_px = 50
//!
//! [synth]
//! n_schools = { min = 1, max = 4 }
//!
//! [mining]
//! negative_iou = 0.4
//!
//! [svm]
//! epochs = 100
//!
//! [cnn]
//! epochs = 50
//!
//! [cnn_shape]
//! hidden = 32
//! ```

use std::path::Path;

use echofinder_core::classify::{CnnParams, CnnShape, LinearParams};
use echofinder_core::mining::{DEFAULT_CROP_SIZE, DEFAULT_NEGATIVE_IOU, DEFAULT_NEG_PER_POS};
use echofinder_core::roi::RoiConfig;
use echofinder_core::synth::SynthConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::fsutil::read_toml;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningParams {
    /// ROIs with best IoU at or above this are positives.
    pub negative_iou: f64,
    /// Negatives kept per positive.
    pub neg_per_pos: f64,
    pub crop_size: usize,
    pub seed: u64,
}

impl Default for MiningParams {
    fn default() -> Self {
        Self {
            negative_iou: DEFAULT_NEGATIVE_IOU,
            neg_per_pos: DEFAULT_NEG_PER_POS,
            crop_size: DEFAULT_CROP_SIZE,
            seed: 0,
        }
    }
}

/// CNN layer widths; input channels and size come from the sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnWidths {
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub hidden: usize,
}

impl Default for CnnWidths {
    fn default() -> Self {
        let s = CnnShape::default();
        Self {
            conv1_filters: s.conv1_filters,
            conv2_filters: s.conv2_filters,
            hidden: s.hidden,
        }
    }
}

impl CnnWidths {
    pub fn shape(&self, in_channels: usize, input_size: usize) -> CnnShape {
        CnnShape {
            in_channels,
            input_size,
            conv1_filters: self.conv1_filters,
            conv2_filters: self.conv2_filters,
            hidden: self.hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub roi: RoiConfig,
    pub synth: SynthConfig,
    pub mining: MiningParams,
    pub svm: LinearParams,
    pub cnn: CnnParams,
    pub cnn_shape: CnnWidths,
}

impl PipelineConfig {
    /// Loads `path`, or the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => read_toml(p),
            None => Ok(Self::default()),
        }
    }

    /// SHA-256 of the canonical JSON encoding of the effective
    /// configuration. Field order is fixed by the struct definitions and
    /// floats use shortest round-trip formatting, so the hash does not
    /// depend on the platform or on how the TOML file was written.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
