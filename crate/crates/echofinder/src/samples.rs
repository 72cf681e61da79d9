//! Mined sample sets: a directory of `.ech` crops plus `samples.json`
//! listing label, source box, best IoU and hand-crafted features.
//!
//! Crops hold normalized values in [0, 1] rather than Sv; the manifest
//! records the window they were normalized with.

use std::path::{Path, PathBuf};

use echofinder_core::classify::FeatureVector;
use echofinder_core::mining::{Crop, Sample};
use echofinder_core::{BoundingBox, Echogram, EchogramMeta, Label, SvWindow};
use serde::{Deserialize, Serialize};

use crate::ech::{load_echogram, save_echogram};
use crate::error::{Error, Result};
use crate::fsutil::{create_dir, read_json, write_json};

pub const MANIFEST: &str = "samples.json";
pub const FORMAT: &str = "echofinder-samples";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub file: String,
    pub label: Label,
    pub source_echogram: String,
    pub source_box: BoundingBox,
    pub best_iou: f64,
    pub features: FeatureVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleManifest {
    pub format: String,
    pub version: u32,
    pub crop_size: usize,
    pub n_channels: usize,
    pub sv_window: SvWindow,
    pub samples: Vec<SampleRecord>,
}

impl SampleManifest {
    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }
}

/// A mined sample with the echogram it came from.
pub struct SourcedSample<'a> {
    pub sample: &'a Sample,
    pub source_id: &'a str,
    pub source_meta: &'a EchogramMeta,
}

/// Crop metadata: the source frequencies with the depth range left as is.
fn crop_echogram(crop: &Crop, meta: &EchogramMeta) -> Result<Echogram> {
    Ok(Echogram::new(crop.size, crop.size, meta.clone(), crop.data.clone())?)
}

/// Writes the sample set into `out`.
pub fn write_sample_set(out: &Path, samples: &[SourcedSample<'_>], crop_size: usize, sv_window: SvWindow) -> Result<SampleManifest> {
    create_dir(out)?;
    let digits = samples.len().saturating_sub(1).to_string().len().max(5);
    let mut records = Vec::with_capacity(samples.len());
    let mut n_channels = 0;
    for (i, s) in samples.iter().enumerate() {
        let file = format!("sample_{i:0digits$}.ech");
        let e = crop_echogram(&s.sample.crop, s.source_meta)?;
        n_channels = e.n_channels();
        save_echogram(&e, &out.join(&file))?;
        records.push(SampleRecord {
            file,
            label: s.sample.label,
            source_echogram: s.source_id.to_string(),
            source_box: s.sample.source_box,
            best_iou: s.sample.iou_with_gt,
            features: s.sample.features,
        });
    }
    let manifest = SampleManifest {
        format: FORMAT.into(),
        version: 1,
        crop_size,
        n_channels,
        sv_window,
        samples: records,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

/// An opened sample set.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub root: PathBuf,
    pub manifest: SampleManifest,
}

impl SampleSet {
    pub fn open(root: &Path) -> Result<Self> {
        let manifest: SampleManifest = read_json(&root.join(MANIFEST))?;
        if manifest.format != FORMAT || manifest.version != 1 {
            return Err(Error::Data(format!(
                "{} is not a version-1 {FORMAT} manifest",
                root.join(MANIFEST).display()
            )));
        }
        Ok(Self {
            root: root.to_owned(),
            manifest,
        })
    }

    /// Feature vectors and labels for the linear baseline.
    pub fn features(&self) -> Vec<(FeatureVector, Label)> {
        self.manifest.samples.iter().map(|s| (s.features, s.label)).collect()
    }

    /// Loads every crop, checking its size against the manifest.
    pub fn crops(&self) -> Result<Vec<(Vec<f32>, Label)>> {
        let m = &self.manifest;
        m.samples
            .iter()
            .map(|s| {
                let path = self.root.join(&s.file);
                let e = load_echogram(&path)?;
                if e.width() != m.crop_size || e.height() != m.crop_size || e.n_channels() != m.n_channels {
                    return Err(Error::Data(format!(
                        "{} is {}x{}x{}, expected {}x{}x{}",
                        path.display(),
                        e.width(),
                        e.height(),
                        e.n_channels(),
                        m.crop_size,
                        m.crop_size,
                        m.n_channels
                    )));
                }
                Ok((e.data().to_vec(), s.label))
            })
            .collect()
    }
}
