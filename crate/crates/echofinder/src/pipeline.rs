//! The pipeline stages behind each CLI command, callable in-process.

use std::path::{Path, PathBuf};

use echofinder_core::classify::{train_cnn, train_linear, Model};
use echofinder_core::eval::{detect, match_detections, Counts};
use echofinder_core::mining::{balance_indices, mine_echogram, MiningConfig, Sample};
use echofinder_core::roi::{extract_rois, RoiConfig};
use echofinder_core::synth::Split;
use echofinder_core::{BoundingBox, Echogram, EchogramMeta, Label};

use crate::annotations::{DetectionFile, DetectionRecord, EchogramDetections};
use crate::config::PipelineConfig;
use crate::dataset::Dataset;
use crate::ech::load_echogram;
use crate::error::{Error, Result};
use crate::pool;
use crate::report::{Report, ReportRow};
use crate::samples::{write_sample_set, SampleManifest, SampleSet, SourcedSample};

/// Echograms named on the command line: a dataset directory, optionally
/// filtered by split, or a single `.ech` file.
pub enum Input {
    Dataset { dataset: Dataset, splits: Vec<Split> },
    File(PathBuf),
}

impl Input {
    pub fn open(path: &Path, splits: &[Split]) -> Result<Self> {
        if path.is_dir() {
            Ok(Input::Dataset {
                dataset: Dataset::open(path)?,
                splits: splits.to_vec(),
            })
        } else if path.is_file() {
            if !splits.is_empty() {
                return Err(Error::Usage("--split only applies to dataset directories".into()));
            }
            Ok(Input::File(path.to_owned()))
        } else {
            Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")))
        }
    }

    /// `(id, path)` of every selected echogram.
    pub fn echograms(&self) -> Vec<(String, PathBuf)> {
        match self {
            Input::Dataset { dataset, splits } => dataset
                .entries(splits)
                .into_iter()
                .map(|e| (e.id.clone(), dataset.echogram_path(e)))
                .collect(),
            Input::File(p) => {
                let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                vec![(id, p.clone())]
            }
        }
    }
}

/// Unclassified ROIs of every selected echogram.
pub fn extract_input(input: &Input, cfg: &RoiConfig, threads: usize) -> Result<DetectionFile> {
    let items = input.echograms();
    let echograms = pool::map(threads, &items, |(id, path)| {
        let e = load_echogram(path)?;
        let boxes = extract_rois(&e, cfg)?.into_iter().map(DetectionRecord::unlabeled).collect();
        Ok(EchogramDetections {
            echogram_id: id.clone(),
            boxes,
        })
    })?;
    Ok(DetectionFile { echograms })
}

/// Every ROI of every selected echogram with its predicted label.
pub fn detect_input(input: &Input, cfg: &RoiConfig, model: &Model, threads: usize) -> Result<DetectionFile> {
    let items = input.echograms();
    let echograms = pool::map(threads, &items, |(id, path)| {
        let e = load_echogram(path)?;
        let boxes = detect(&e, cfg, model)?.iter().map(DetectionRecord::from).collect();
        Ok(EchogramDetections {
            echogram_id: id.clone(),
            boxes,
        })
    })?;
    Ok(DetectionFile { echograms })
}

/// Mines every selected echogram, balances the pooled samples and writes
/// the sample set to `out`.
pub fn mine_dataset(dataset: &Dataset, splits: &[Split], cfg: &PipelineConfig, out: &Path, threads: usize) -> Result<SampleManifest> {
    let m = &cfg.mining;
    let mining = MiningConfig {
        roi: cfg.roi.clone(),
        negative_iou: m.negative_iou,
        crop_size: m.crop_size,
    };
    let entries = dataset.entries(splits);
    if entries.is_empty() {
        return Err(Error::Data("no echograms in the selected splits".into()));
    }
    let mined: Vec<(String, EchogramMeta, Vec<Sample>)> = pool::map(threads, &entries, |entry| {
        let (e, gt) = dataset.load_scene(entry)?;
        let samples = mine_echogram(&e, &gt, &mining)?;
        Ok((entry.id.clone(), e.meta().clone(), samples))
    })?;
    let pooled: Vec<SourcedSample<'_>> = mined
        .iter()
        .flat_map(|(id, meta, samples)| {
            samples.iter().map(move |sample| SourcedSample {
                sample,
                source_id: id,
                source_meta: meta,
            })
        })
        .collect();
    if !(m.neg_per_pos >= 0.0) {
        return Err(Error::Usage("mining.neg_per_pos must be non-negative".into()));
    }
    let labels: Vec<Label> = pooled.iter().map(|s| s.sample.label).collect();
    let keep = balance_indices(&labels, m.neg_per_pos, m.seed);
    let kept: Vec<SourcedSample<'_>> = keep
        .into_iter()
        .map(|i| SourcedSample {
            sample: pooled[i].sample,
            source_id: pooled[i].source_id,
            source_meta: pooled[i].source_meta,
        })
        .collect();
    write_sample_set(out, &kept, m.crop_size, cfg.roi.sv_window)
}

/// Which classifier to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Svm,
    Cnn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Svm => "svm",
            ModelKind::Cnn => "cnn",
        }
    }
}

/// A trained model with its per-epoch training objective.
pub struct Trained {
    pub model: Model,
    pub history: Vec<f64>,
}

/// Trains on a sample set; `seed` overrides the configured seed.
pub fn train_model(set: &SampleSet, kind: ModelKind, cfg: &PipelineConfig, seed: Option<u64>) -> Result<Trained> {
    match kind {
        ModelKind::Svm => {
            let mut params = cfg.svm.clone();
            params.seed = seed.unwrap_or(params.seed);
            let t = train_linear(&set.features(), &params)?;
            Ok(Trained {
                model: Model::Linear(t.model),
                history: t.objective,
            })
        }
        ModelKind::Cnn => {
            let mut params = cfg.cnn.clone();
            params.seed = seed.unwrap_or(params.seed);
            let m = &set.manifest;
            let shape = cfg.cnn_shape.shape(m.n_channels, m.crop_size);
            let crops = set.crops()?;
            let data: Vec<(&[f32], Label)> = crops.iter().map(|(d, l)| (d.as_slice(), *l)).collect();
            let t = train_cnn(&data, shape, &params)?;
            Ok(Trained {
                model: Model::Cnn(t.model),
                history: t.loss_history,
            })
        }
    }
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::Usage("at least one IoU threshold is required".into()));
    }
    if taus.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::Usage("IoU thresholds must lie in [0, 1]".into()));
    }
    if taus.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Usage("IoU thresholds must be non-decreasing".into()));
    }
    Ok(())
}

/// Micro-averaged report over `(scored boxes, ground truth)` pairs.
pub fn report_from_scenes(source: String, scenes: &[(Vec<BoundingBox>, Vec<BoundingBox>)], taus: &[f64]) -> Result<Report> {
    check_taus(taus)?;
    let rows = taus
        .iter()
        .map(|&t| {
            let counts: Counts = scenes.iter().map(|(d, g)| match_detections(d, g, t).counts()).sum();
            ReportRow::new(counts, t)
        })
        .collect();
    Ok(Report {
        source,
        n_echograms: scenes.len(),
        n_ground_truth: scenes.iter().map(|(_, g)| g.len()).sum(),
        rows,
    })
}

fn ground_truth(dataset: &Dataset, splits: &[Split], threads: usize) -> Result<Vec<(String, Vec<BoundingBox>)>> {
    let entries = dataset.entries(splits);
    if entries.is_empty() {
        return Err(Error::Data("no echograms in the selected splits".into()));
    }
    pool::map(threads, &entries, |entry| {
        let (_, gt) = dataset.load_scene(entry)?;
        Ok((entry.id.clone(), gt))
    })
}

/// Scores a detection file against the dataset ground truth. Labeled
/// files are scored on their positive boxes, unlabeled ones on every box.
pub fn evaluate_detections(
    dataset: &Dataset,
    splits: &[Split],
    detections: &DetectionFile,
    source: String,
    taus: &[f64],
    threads: usize,
) -> Result<Report> {
    let scenes = ground_truth(dataset, splits, threads)?
        .into_iter()
        .map(|(id, gt)| {
            let d = detections
                .find(&id)
                .ok_or_else(|| Error::Data(format!("no detections listed for echogram {id}")))?;
            Ok((d.scored_boxes()?, gt))
        })
        .collect::<Result<Vec<_>>>()?;
    report_from_scenes(source, &scenes, taus)
}

/// Runs detection with `model` on the selected echograms and scores it.
pub fn evaluate_model(
    dataset: &Dataset,
    splits: &[Split],
    cfg: &RoiConfig,
    model: &Model,
    source: String,
    taus: &[f64],
    threads: usize,
) -> Result<Report> {
    check_taus(taus)?;
    let entries = dataset.entries(splits);
    if entries.is_empty() {
        return Err(Error::Data("no echograms in the selected splits".into()));
    }
    let scenes = pool::map(threads, &entries, |entry| {
        let (e, gt): (Echogram, _) = dataset.load_scene(entry)?;
        let dets = detect(&e, cfg, model)?;
        let positives = dets.iter().filter(|a| a.label.is_positive()).map(|a| a.bbox).collect();
        Ok((positives, gt))
    })?;
    report_from_scenes(source, &scenes, taus)
}
