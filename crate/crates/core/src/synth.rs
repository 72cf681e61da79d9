//! Synthetic multifrequency echograms with known school locations.
//!
//! The background of every channel is independent Gaussian Sv noise.
//! Targets are anisotropic Gaussian bumps (in dB) elongated vertically:
//!
//! * schools appear in `consensus_channels` channels with the
//!   `school_gains` frequency profile and are the only annotated targets;
//! * distractors share the school geometry and mean strength but follow
//!   the `distractor_gains` profile;
//! * partial targets appear in only `partial_channels` channels.
//!
//! Single-channel clutter speckles are added last. A school's annotation
//! box is the tight box of the pixels where its nominal bump exceeds
//! `3 * noise_sigma_db`.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::echogram::{Echogram, EchogramMeta, Grid};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Annotation, BoundingBox};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Inclusive `[min, max]` range.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Span<T> {
    pub min: T,
    pub max: T,
}

impl<T: PartialOrd + Copy> Span<T> {
    pub const fn new(min: T, max: T) -> Self {
        Self { min, max }
    }

    fn is_ordered(&self) -> bool {
        self.min <= self.max
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub frequencies_khz: Vec<f32>,
    pub depth_min_m: f32,
    pub depth_max_m: f32,
    pub start_epoch_s: i64,
    pub duration_s: f32,
    pub noise_mean_db: f64,
    pub noise_sigma_db: f64,
    pub n_schools: Span<usize>,
    /// Vertical extent of the 3-sigma box, pixels.
    pub school_height_px: Span<f64>,
    /// Horizontal extent of the 3-sigma box, pixels.
    pub school_width_px: Span<f64>,
    /// Peak strength above the noise mean, dB.
    pub school_peak_db: Span<f64>,
    /// Number of channels each school appears in.
    pub consensus_channels: usize,
    /// Per-channel amplitude factor of schools.
    pub school_gains: Vec<f64>,
    pub n_distractors: Span<usize>,
    /// Per-channel amplitude factor of distractors.
    pub distractor_gains: Vec<f64>,
    pub n_partial: Span<usize>,
    pub partial_channels: usize,
    pub clutter_per_channel: usize,
    pub clutter_size_px: Span<usize>,
    pub clutter_db: f64,
    /// Minimum gap between target boxes, pixels.
    pub margin_px: u32,
    pub max_attempts: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 1200,
            height: 571,
            frequencies_khz: alloc::vec![67.0, 125.0, 200.0, 455.0],
            depth_min_m: 0.0,
            depth_max_m: 50.0,
            start_epoch_s: 0,
            duration_s: 3600.0,
            noise_mean_db: -75.0,
            noise_sigma_db: 1.5,
            n_schools: Span::new(1, 4),
            school_height_px: Span::new(60.0, 200.0),
            school_width_px: Span::new(10.0, 40.0),
            school_peak_db: Span::new(20.0, 35.0),
            consensus_channels: 4,
            school_gains: alloc::vec![1.0, 0.9, 0.8, 0.7],
            n_distractors: Span::new(1, 3),
            distractor_gains: alloc::vec![0.7, 0.8, 0.9, 1.0],
            n_partial: Span::new(0, 2),
            partial_channels: 2,
            clutter_per_channel: 200,
            clutter_size_px: Span::new(1, 4),
            clutter_db: 15.0,
            margin_px: 6,
            max_attempts: 1000,
        }
    }
}

const TAN_60: f64 = 1.732_050_807_568_877_2;

impl SynthConfig {
    pub fn n_channels(&self) -> usize {
        self.frequencies_khz.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_channels();
        if self.width == 0 || self.height == 0 {
            return Err(invalid("synth size", "dimensions must be positive"));
        }
        if n == 0 {
            return Err(invalid("frequencies_khz", "at least one channel is required"));
        }
        if !(self.noise_sigma_db > 0.0 && self.noise_mean_db.is_finite()) {
            return Err(invalid("noise", "sigma must be positive and mean finite"));
        }
        let spans_ok = self.n_schools.is_ordered()
            && self.school_height_px.is_ordered()
            && self.school_width_px.is_ordered()
            && self.school_peak_db.is_ordered()
            && self.n_distractors.is_ordered()
            && self.n_partial.is_ordered()
            && self.clutter_size_px.is_ordered();
        if !spans_ok {
            return Err(invalid("synth ranges", "min must not exceed max"));
        }
        if self.school_width_px.min < 1.0 {
            return Err(invalid("school_width_px", "must be at least 1 pixel"));
        }
        if self.school_height_px.min <= TAN_60 * self.school_width_px.min {
            return Err(invalid(
                "school_height_px",
                "must exceed tan(60 deg) times the minimum width",
            ));
        }
        if self.school_peak_db.min <= 3.0 * self.noise_sigma_db {
            return Err(invalid("school_peak_db", "must exceed three noise sigmas"));
        }
        if self.consensus_channels == 0 || self.consensus_channels > n {
            return Err(invalid("consensus_channels", "must lie in [1, n_channels]"));
        }
        if self.partial_channels == 0 || self.partial_channels > n {
            return Err(invalid("partial_channels", "must lie in [1, n_channels]"));
        }
        if self.school_gains.len() != n || self.distractor_gains.len() != n {
            return Err(invalid("gains", "need one gain per channel"));
        }
        if self
            .school_gains
            .iter()
            .chain(&self.distractor_gains)
            .any(|g| !(*g > 0.0 && g.is_finite()))
        {
            return Err(invalid("gains", "must be positive"));
        }
        if self.clutter_size_px.min == 0 {
            return Err(invalid("clutter_size_px", "must be at least 1"));
        }
        Ok(())
    }

    fn meta(&self) -> EchogramMeta {
        EchogramMeta {
            frequencies_khz: self.frequencies_khz.clone(),
            depth_min_m: self.depth_min_m,
            depth_max_m: self.depth_max_m,
            start_epoch_s: self.start_epoch_s,
            duration_s: self.duration_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    School,
    Distractor,
    Partial,
}

/// A placed bump.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub kind: TargetKind,
    pub center: (f64, f64),
    pub sigma: (f64, f64),
    pub peak_db: f64,
    /// Amplitude factor per channel; zero where the target is absent.
    pub gains: Vec<f64>,
    /// Pixels where the nominal bump exceeds three noise sigmas.
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub echogram: Echogram,
    /// Ground truth: one school annotation per school target.
    pub annotations: Vec<Annotation>,
    pub targets: Vec<Target>,
}

impl SynthScene {
    pub fn gt_boxes(&self) -> Vec<BoundingBox> {
        self.annotations.iter().map(|a| a.bbox).collect()
    }

    pub fn boxes_of(&self, kind: TargetKind) -> Vec<BoundingBox> {
        self.targets.iter().filter(|t| t.kind == kind).map(|t| t.bbox).collect()
    }
}

/// 64-bit finalizer of SplitMix64.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-echogram seed derived from a dataset seed and an index.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

struct Normal {
    spare: Option<f64>,
}

impl Normal {
    fn sample(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // Box-Muller on (0, 1] x [0, 1).
        let u1 = 1.0 - rng.random::<f64>();
        let u2 = rng.random::<f64>();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let a = 2.0 * core::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(a));
        r * libm::cos(a)
    }
}

fn sample_span(rng: &mut ChaCha8Rng, s: Span<f64>) -> f64 {
    if s.min == s.max {
        s.min
    } else {
        rng.random_range(s.min..=s.max)
    }
}

fn sample_count(rng: &mut ChaCha8Rng, s: Span<usize>) -> usize {
    rng.random_range(s.min..=s.max)
}

/// Tight box of integer pixels inside the ellipse
/// `dx^2 / (2 sx^2) + dy^2 / (2 sy^2) < level`.
fn contour_box(center: (f64, f64), sigma: (f64, f64), level: f64, w: usize, h: usize) -> Option<BoundingBox> {
    let ax = sigma.0 * libm::sqrt(2.0 * level);
    let ay = sigma.1 * libm::sqrt(2.0 * level);
    let x_lo = libm::floor(center.0 - ax).max(0.0) as usize;
    let x_hi = (libm::ceil(center.0 + ax) as usize).min(w - 1);
    let y_lo = libm::floor(center.1 - ay).max(0.0) as usize;
    let y_hi = (libm::ceil(center.1 + ay) as usize).min(h - 1);
    let (mut bx0, mut by0, mut bx1, mut by1) = (usize::MAX, usize::MAX, 0, 0);
    for y in y_lo..=y_hi {
        let dy = y as f64 - center.1;
        for x in x_lo..=x_hi {
            let dx = x as f64 - center.0;
            let q = dx * dx / (2.0 * sigma.0 * sigma.0) + dy * dy / (2.0 * sigma.1 * sigma.1);
            if q < level {
                bx0 = bx0.min(x);
                by0 = by0.min(y);
                bx1 = bx1.max(x);
                by1 = by1.max(y);
            }
        }
    }
    (bx0 != usize::MAX).then(|| BoundingBox::from_corners(bx0 as u32, by0 as u32, bx1 as u32, by1 as u32))
}

fn place_target(
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
    kind: TargetKind,
    placed: &[Target],
) -> Result<Target> {
    let n = cfg.n_channels();
    let three_sigma = 3.0 * cfg.noise_sigma_db;
    for _ in 0..cfg.max_attempts {
        let height = sample_span(rng, cfg.school_height_px);
        let max_w = cfg.school_width_px.max.min(height / TAN_60);
        let width = sample_span(rng, Span::new(cfg.school_width_px.min, max_w.max(cfg.school_width_px.min)));
        let peak = sample_span(rng, cfg.school_peak_db);
        let level = libm::log(peak / three_sigma);
        let sx = 0.5 * width / libm::sqrt(2.0 * level);
        let sy = 0.5 * height / libm::sqrt(2.0 * level);
        let m = f64::from(cfg.margin_px);
        let (x_lo, x_hi) = (0.5 * width + m, cfg.width as f64 - 0.5 * width - m - 1.0);
        let (y_lo, y_hi) = (0.5 * height + m, cfg.height as f64 - 0.5 * height - m - 1.0);
        if x_lo > x_hi || y_lo > y_hi {
            return Err(Error::Placement {
                attempts: cfg.max_attempts,
            });
        }
        let center = (rng.random_range(x_lo..=x_hi), rng.random_range(y_lo..=y_hi));
        let Some(bbox) = contour_box(center, (sx, sy), level, cfg.width, cfg.height) else {
            continue;
        };
        let guard = bbox.expanded(cfg.margin_px);
        if placed.iter().any(|t| guard.overlaps(&t.bbox)) {
            continue;
        }
        let gains = match kind {
            TargetKind::School => {
                let mut chans: Vec<usize> = (0..n).collect();
                if cfg.consensus_channels < n {
                    chans.shuffle(rng);
                    chans.truncate(cfg.consensus_channels);
                }
                (0..n)
                    .map(|c| if chans.contains(&c) { cfg.school_gains[c] } else { 0.0 })
                    .collect()
            }
            TargetKind::Distractor => cfg.distractor_gains.clone(),
            TargetKind::Partial => {
                let mut chans: Vec<usize> = (0..n).collect();
                chans.shuffle(rng);
                chans.truncate(cfg.partial_channels);
                (0..n).map(|c| if chans.contains(&c) { 1.0 } else { 0.0 }).collect()
            }
        };
        return Ok(Target {
            kind,
            center,
            sigma: (sx, sy),
            peak_db: peak,
            gains,
            bbox,
        });
    }
    Err(Error::Placement {
        attempts: cfg.max_attempts,
    })
}

fn add_bump(grid: &mut Grid<f32>, t: &Target, amplitude: f64) {
    // Beyond q = 12 the bump is below 1e-5 of its peak.
    const CUTOFF: f64 = 12.0;
    let (w, h) = (grid.width(), grid.height());
    let ax = t.sigma.0 * libm::sqrt(2.0 * CUTOFF);
    let ay = t.sigma.1 * libm::sqrt(2.0 * CUTOFF);
    let x_lo = libm::floor(t.center.0 - ax).max(0.0) as usize;
    let x_hi = (libm::ceil(t.center.0 + ax).max(0.0) as usize).min(w - 1);
    let y_lo = libm::floor(t.center.1 - ay).max(0.0) as usize;
    let y_hi = (libm::ceil(t.center.1 + ay).max(0.0) as usize).min(h - 1);
    let (kx, ky) = (0.5 / (t.sigma.0 * t.sigma.0), 0.5 / (t.sigma.1 * t.sigma.1));
    for y in y_lo..=y_hi {
        let dy = y as f64 - t.center.1;
        for x in x_lo..=x_hi {
            let dx = x as f64 - t.center.0;
            let q = dx * dx * kx + dy * dy * ky;
            if q < CUTOFF {
                let v = f64::from(grid.get(x, y)) + amplitude * libm::exp(-q);
                grid.set(x, y, v as f32);
            }
        }
    }
}

/// Generates one echogram and its ground truth. Identical `(cfg, seed)`
/// give bit-identical output.
pub fn generate_echogram(cfg: &SynthConfig, seed: u64) -> Result<SynthScene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_schools = sample_count(&mut rng, cfg.n_schools);
    let n_distractors = sample_count(&mut rng, cfg.n_distractors);
    let n_partial = sample_count(&mut rng, cfg.n_partial);

    let mut targets: Vec<Target> = Vec::new();
    for (kind, count) in [
        (TargetKind::School, n_schools),
        (TargetKind::Distractor, n_distractors),
        (TargetKind::Partial, n_partial),
    ] {
        for _ in 0..count {
            let t = place_target(cfg, &mut rng, kind, &targets)?;
            targets.push(t);
        }
    }

    let mut normal = Normal { spare: None };
    let mut channels = Vec::with_capacity(cfg.n_channels());
    for c in 0..cfg.n_channels() {
        let mut g = Grid::from_fn(cfg.width, cfg.height, |_, _| {
            (cfg.noise_mean_db + cfg.noise_sigma_db * normal.sample(&mut rng)) as f32
        });
        for t in &targets {
            if t.gains[c] > 0.0 {
                add_bump(&mut g, t, t.peak_db * t.gains[c]);
            }
        }
        for _ in 0..cfg.clutter_per_channel {
            let s = rng.random_range(cfg.clutter_size_px.min..=cfg.clutter_size_px.max);
            let s = s.min(cfg.width).min(cfg.height);
            let x0 = rng.random_range(0..=cfg.width - s);
            let y0 = rng.random_range(0..=cfg.height - s);
            for y in y0..y0 + s {
                for x in x0..x0 + s {
                    let v = f64::from(g.get(x, y)) + cfg.clutter_db;
                    g.set(x, y, v as f32);
                }
            }
        }
        channels.push(g);
    }

    let echogram = Echogram::from_channels(cfg.meta(), channels)?;
    let annotations = targets
        .iter()
        .filter(|t| t.kind == TargetKind::School)
        .map(|t| Annotation::school(t.bbox))
        .collect();
    Ok(SynthScene {
        echogram,
        annotations,
        targets,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Sizes `(train, val, test)` of the 70/30 split with the training part
/// further split 80/20. Proportions round to nearest; ties go to training.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train_total = (7 * n + 5) / 10;
    let val = (2 * train_total + 4) / 10;
    (train_total - val, val, n - train_total)
}

/// Seeded assignment of `n` echograms to splits, indexed by echogram.
pub fn assign_splits(n: usize, seed: u64) -> Vec<Split> {
    let (train, val, _) = split_sizes(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, u64::MAX)));
    let mut out = alloc::vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        if rank < train {
            out[i] = Split::Train;
        } else if rank < train + val {
            out[i] = Split::Val;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            width: 300,
            height: 240,
            n_schools: Span::new(3, 3),
            n_distractors: Span::new(0, 0),
            n_partial: Span::new(0, 0),
            clutter_per_channel: 20,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn fixed_school_count() {
        let s = generate_echogram(&small(), 5).unwrap();
        assert_eq!(s.annotations.len(), 3);
    }

    #[test]
    fn zero_schools_is_pure_background() {
        let cfg = SynthConfig {
            n_schools: Span::new(0, 0),
            clutter_per_channel: 0,
            ..small()
        };
        let s = generate_echogram(&cfg, 1).unwrap();
        assert!(s.annotations.is_empty());
        let data = s.echogram.data();
        let mean = data.iter().map(|&v| f64::from(v)).sum::<f64>() / data.len() as f64;
        assert!((mean - cfg.noise_mean_db).abs() < 0.05);
    }

    #[test]
    fn same_seed_same_scene() {
        let a = generate_echogram(&small(), 9).unwrap();
        let b = generate_echogram(&small(), 9).unwrap();
        assert_eq!(a, b);
        let c = generate_echogram(&small(), 10).unwrap();
        assert_ne!(a.echogram, c.echogram);
    }

    #[test]
    fn overcrowded_config_fails_placement() {
        let cfg = SynthConfig {
            width: 60,
            height: 240,
            n_schools: Span::new(6, 6),
            max_attempts: 50,
            ..small()
        };
        assert!(matches!(generate_echogram(&cfg, 0), Err(Error::Placement { .. })));
    }

    #[test]
    fn split_arithmetic() {
        assert_eq!(split_sizes(100), (56, 14, 30));
        assert_eq!(split_sizes(10), (6, 1, 3));
        assert_eq!(split_sizes(1), (1, 0, 0));
        let s = assign_splits(100, 7);
        assert_eq!(s.iter().filter(|&&x| x == Split::Train).count(), 56);
        assert_eq!(s.iter().filter(|&&x| x == Split::Val).count(), 14);
        assert_eq!(s, assign_splits(100, 7));
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig::default().validate().is_ok());
        let bad = SynthConfig {
            school_height_px: Span::new(15.0, 200.0),
            ..SynthConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SynthConfig {
            school_gains: alloc::vec![1.0],
            ..SynthConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
