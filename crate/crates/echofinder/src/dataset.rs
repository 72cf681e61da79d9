//! Synthetic dataset directories: one `.ech` and one annotation `.json` per
//! echogram plus `manifest.json` listing id, split and seed.

use std::path::{Path, PathBuf};

use echofinder_core::synth::{assign_splits, generate_echogram, mix_seed, Split, SynthConfig};
use echofinder_core::{Annotation, BoundingBox, Echogram};
use serde::{Deserialize, Serialize};

use crate::annotations::{read_annotations, write_annotations, AnnotationFile};
use crate::ech::{load_echogram, save_echogram};
use crate::error::{Error, Result};
use crate::fsutil::{create_dir, read_json, write_json};
use crate::pool;

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT: &str = "echofinder-dataset";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub id: String,
    pub split: Split,
    /// Sub-seed the echogram was generated from.
    pub seed: u64,
    /// File names relative to the dataset directory.
    pub echogram: String,
    pub annotations: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub synth_config: SynthConfig,
    pub entries: Vec<DatasetEntry>,
}

/// Echogram id for index `i` in a dataset of `n`.
pub fn echogram_id(i: usize, n: usize) -> String {
    let digits = n.saturating_sub(1).to_string().len().max(4);
    format!("echo_{i:0digits$}")
}

/// Generates `n` echograms into `out`. Echogram `i` uses sub-seed
/// `mix_seed(seed, i)`, so the output does not depend on `threads`.
pub fn generate_dataset(cfg: &SynthConfig, n: usize, seed: u64, out: &Path, threads: usize) -> Result<DatasetManifest> {
    if n == 0 {
        return Err(Error::Usage("the dataset needs at least one echogram".into()));
    }
    cfg.validate()?;
    create_dir(out)?;
    let splits = assign_splits(n, seed);
    let entries: Vec<DatasetEntry> = (0..n)
        .map(|i| {
            let id = echogram_id(i, n);
            DatasetEntry {
                split: splits[i],
                seed: mix_seed(seed, i as u64),
                echogram: format!("{id}.ech"),
                annotations: format!("{id}.json"),
                id,
            }
        })
        .collect();
    pool::map(threads, &entries, |entry| {
        let scene = generate_echogram(cfg, entry.seed)?;
        save_echogram(&scene.echogram, &out.join(&entry.echogram))?;
        write_annotations(
            &out.join(&entry.annotations),
            &AnnotationFile::new(entry.id.clone(), &scene.annotations),
        )
    })?;
    let manifest = DatasetManifest {
        format: FORMAT.into(),
        version: 1,
        seed,
        synth_config: cfg.clone(),
        entries,
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

/// An opened dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let manifest: DatasetManifest = read_json(&root.join(MANIFEST))?;
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

    /// Entries in any of `splits`; every entry when `splits` is empty.
    pub fn entries(&self, splits: &[Split]) -> Vec<&DatasetEntry> {
        self.manifest
            .entries
            .iter()
            .filter(|e| splits.is_empty() || splits.contains(&e.split))
            .collect()
    }

    pub fn echogram_path(&self, entry: &DatasetEntry) -> PathBuf {
        self.root.join(&entry.echogram)
    }

    pub fn load_echogram(&self, entry: &DatasetEntry) -> Result<Echogram> {
        load_echogram(&self.echogram_path(entry))
    }

    /// Ground truth validated against the echogram dimensions.
    pub fn load_annotations(&self, entry: &DatasetEntry, e: &Echogram) -> Result<Vec<Annotation>> {
        let file = read_annotations(&self.root.join(&entry.annotations))?;
        if file.echogram_id != entry.id {
            return Err(Error::Data(format!(
                "annotation file for {} names echogram {}",
                entry.id, file.echogram_id
            )));
        }
        file.validate(e.width(), e.height())
    }

    /// Echogram and school boxes of one entry.
    pub fn load_scene(&self, entry: &DatasetEntry) -> Result<(Echogram, Vec<BoundingBox>)> {
        let e = self.load_echogram(entry)?;
        let gt = self
            .load_annotations(entry, &e)?
            .into_iter()
            .filter(|a| a.label.is_positive())
            .map(|a| a.bbox)
            .collect();
        Ok((e, gt))
    }
}
