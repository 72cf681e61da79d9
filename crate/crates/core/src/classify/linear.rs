//! Linear-kernel SVM trained by stochastic subgradient descent on the
//! L2-regularized hinge loss.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{FeatureVector, N_FEATURES};
use crate::error::{invalid, Error, Result};
use crate::geometry::Label;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Trained model. Parameters are held at the precision they are stored
/// with, so a saved and reloaded model predicts identically.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: [f32; N_FEATURES],
    pub bias: f32,
    pub feature_means: [f32; N_FEATURES],
    pub feature_scales: [f32; N_FEATURES],
}

impl LinearModel {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .weights
            .iter()
            .chain(&self.feature_means)
            .chain(&self.feature_scales)
            .chain(core::iter::once(&self.bias));
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear model"));
        }
        if self.feature_scales.iter().any(|&s| s <= 0.0) {
            return Err(invalid("feature_scales", "must be strictly positive"));
        }
        Ok(())
    }

    pub fn normalize(&self, f: &FeatureVector) -> [f64; N_FEATURES] {
        normalize(&f.to_array(), &self.feature_means, &self.feature_scales)
    }

    /// Signed distance-like score `w . z + b` of the normalized features.
    pub fn margin(&self, f: &FeatureVector) -> f64 {
        let z = self.normalize(f);
        dot(&self.weights.map(f64::from), &z) + f64::from(self.bias)
    }

    /// Positive when the margin is strictly above zero.
    pub fn predict(&self, f: &FeatureVector) -> (Label, f64) {
        let m = self.margin(f);
        (Label::from_positive(m > 0.0), m)
    }
}

pub fn predict_linear(m: &LinearModel, f: &FeatureVector) -> (Label, f64) {
    m.predict(f)
}

fn normalize(x: &[f64; N_FEATURES], means: &[f32; N_FEATURES], scales: &[f32; N_FEATURES]) -> [f64; N_FEATURES] {
    core::array::from_fn(|i| (x[i] - f64::from(means[i])) / f64::from(scales[i]))
}

fn dot(a: &[f64; N_FEATURES], b: &[f64; N_FEATURES]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-feature mean and population standard deviation; a zero deviation is
/// replaced by 1 so constant features pass through centred.
pub fn fit_scaler(data: &[[f64; N_FEATURES]]) -> ([f64; N_FEATURES], [f64; N_FEATURES]) {
    let n = data.len().max(1) as f64;
    let means: [f64; N_FEATURES] = core::array::from_fn(|i| data.iter().map(|r| r[i]).sum::<f64>() / n);
    let scales = core::array::from_fn(|i| {
        let var = data.iter().map(|r| { let d = r[i] - means[i]; d * d }).sum::<f64>() / n;
        let sd = libm::sqrt(var);
        if sd > 0.0 {
            sd
        } else {
            1.0
        }
    });
    (means, scales)
}

/// Subgradient of `reg/2 |w|^2 + max(0, 1 - y (w . z + b))` at one sample,
/// as `(d/dw, d/db)`; `y` is +1 or -1.
pub fn hinge_subgradient(
    w: &[f64; N_FEATURES],
    b: f64,
    z: &[f64; N_FEATURES],
    y: f64,
    reg: f64,
) -> ([f64; N_FEATURES], f64) {
    let active = y * (dot(w, z) + b) < 1.0;
    let gw = core::array::from_fn(|i| reg * w[i] - if active { y * z[i] } else { 0.0 });
    (gw, if active { -y } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct LinearParams {
    pub epochs: usize,
    pub lr: f64,
    pub reg: f64,
    pub seed: u64,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 0.1,
            reg: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearTraining {
    pub model: LinearModel,
    /// Regularized hinge objective over the training set after each epoch.
    pub objective: Vec<f64>,
}

fn objective(w: &[f64; N_FEATURES], b: f64, z: &[[f64; N_FEATURES]], y: &[f64], reg: f64) -> f64 {
    let hinge: f64 = z.iter().zip(y).map(|(zi, yi)| (1.0 - yi * (dot(w, zi) + b)).max(0.0)).sum();
    0.5 * reg * dot(w, w) + hinge / z.len() as f64
}

/// Fits feature normalization, then runs seeded SGD with step size
/// `lr / (1 + lr * reg * t)` over shuffled epochs.
pub fn train_linear(samples: &[(FeatureVector, Label)], params: &LinearParams) -> Result<LinearTraining> {
    if samples.iter().any(|(f, _)| !f.is_finite()) {
        return Err(Error::NonFinite("training features"));
    }
    let has_pos = samples.iter().any(|(_, l)| l.is_positive());
    let has_neg = samples.iter().any(|(_, l)| !l.is_positive());
    if !(has_pos && has_neg) {
        return Err(Error::SingleClass);
    }
    if !(params.lr >= 0.0 && params.lr.is_finite()) {
        return Err(invalid("lr", "must be finite and non-negative"));
    }
    if !(params.reg >= 0.0 && params.reg.is_finite()) {
        return Err(invalid("reg", "must be finite and non-negative"));
    }

    let raw: Vec<[f64; N_FEATURES]> = samples.iter().map(|(f, _)| f.to_array()).collect();
    let (means, scales) = fit_scaler(&raw);
    // Train against the stored precision of the scaler.
    let means32 = means.map(|v| v as f32);
    let scales32 = scales.map(|v| v as f32);
    let z: Vec<[f64; N_FEATURES]> = raw.iter().map(|r| normalize(r, &means32, &scales32)).collect();
    let y: Vec<f64> = samples.iter().map(|(_, l)| if l.is_positive() { 1.0 } else { -1.0 }).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut w = [0.0f64; N_FEATURES];
    let mut b = 0.0f64;
    let mut t = 0u64;
    let mut history = Vec::with_capacity(params.epochs);
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = params.lr / (1.0 + params.lr * params.reg * t as f64);
            let (gw, gb) = hinge_subgradient(&w, b, &z[i], y[i], params.reg);
            for k in 0..N_FEATURES {
                w[k] -= eta * gw[k];
            }
            b -= eta * gb;
            t += 1;
        }
        history.push(objective(&w, b, &z, &y, params.reg));
    }

    let model = LinearModel {
        weights: w.map(|v| v as f32),
        bias: b as f32,
        feature_means: means32,
        feature_scales: scales32,
    };
    model.validate()?;
    Ok(LinearTraining {
        model,
        objective: history,
    })
}
