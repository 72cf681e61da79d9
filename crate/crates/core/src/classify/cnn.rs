//! Small convolutional classifier for ROI crops.
//!
//! Architecture: conv 3x3 (pad 1) + ReLU + 2x2 max-pool, twice, then a
//! ReLU hidden layer and a two-way softmax. The network is generic over its
//! float type: models train and ship in `f32`, while gradient checks run
//! the same code in `f64`.

use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::Label;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const N_CLASSES: usize = 2;
const K: usize = 3;

#[inline]
fn c<F: Float>(v: f64) -> F {
    F::from(v).expect("constant representable")
}

/// Layer sizes of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CnnShape {
    pub in_channels: usize,
    /// Side of the square input; must be divisible by 4.
    pub input_size: usize,
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub hidden: usize,
}

impl Default for CnnShape {
    fn default() -> Self {
        Self {
            in_channels: 4,
            input_size: 32,
            conv1_filters: 8,
            conv2_filters: 16,
            hidden: 32,
        }
    }
}

impl CnnShape {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.conv1_filters == 0 || self.conv2_filters == 0 || self.hidden == 0 {
            return Err(invalid("cnn shape", "layer widths must be positive"));
        }
        if self.input_size == 0 || self.input_size % 4 != 0 {
            return Err(invalid("cnn shape", "input size must be a positive multiple of 4"));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.input_size * self.input_size
    }

    pub fn flat_len(&self) -> usize {
        let s = self.input_size / 4;
        self.conv2_filters * s * s
    }
}

/// 3x3 convolution, stride 1, zero padding 1. Weights are laid out
/// `[out][in][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<F> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Float> Conv2d<F> {
    pub fn zeros(in_ch: usize, out_ch: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            weight: alloc::vec![F::zero(); out_ch * in_ch * K * K],
            bias: alloc::vec![F::zero(); out_ch],
        }
    }

    /// Valid output range along one axis for kernel offset `k`.
    #[inline]
    fn span(k: usize, n: usize) -> (usize, usize) {
        // Output index o reads input o + k - 1.
        let lo = if k == 0 { 1 } else { 0 };
        let hi = if k == K - 1 { n - 1 } else { n };
        (lo, hi)
    }

    pub fn forward(&self, input: &[F], h: usize, w: usize) -> Vec<F> {
        let plane = h * w;
        let mut out = alloc::vec![F::zero(); self.out_ch * plane];
        for o in 0..self.out_ch {
            let dst = &mut out[o * plane..(o + 1) * plane];
            dst.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.in_ch {
                let src = &input[i * plane..(i + 1) * plane];
                for ky in 0..K {
                    let (y0, y1) = Self::span(ky, h);
                    for kx in 0..K {
                        let wv = self.weight[((o * self.in_ch + i) * K + ky) * K + kx];
                        let (x0, x1) = Self::span(kx, w);
                        for y in y0..y1 {
                            let sy = y + ky - 1;
                            let drow = &mut dst[y * w + x0..y * w + x1];
                            let srow = &src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                            for (d, &s) in drow.iter_mut().zip(srow) {
                                *d = *d + wv * s;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the input when `want_input` is set.
    pub fn backward(
        &self,
        input: &[F],
        h: usize,
        w: usize,
        grad_out: &[F],
        grad: &mut Conv2d<F>,
        want_input: bool,
    ) -> Option<Vec<F>> {
        let plane = h * w;
        let mut grad_in = if want_input {
            Some(alloc::vec![F::zero(); self.in_ch * plane])
        } else {
            None
        };
        for o in 0..self.out_ch {
            let g = &grad_out[o * plane..(o + 1) * plane];
            grad.bias[o] = g.iter().fold(grad.bias[o], |a, &v| a + v);
            for i in 0..self.in_ch {
                let src = &input[i * plane..(i + 1) * plane];
                for ky in 0..K {
                    let (y0, y1) = Self::span(ky, h);
                    for kx in 0..K {
                        let widx = ((o * self.in_ch + i) * K + ky) * K + kx;
                        let wv = self.weight[widx];
                        let (x0, x1) = Self::span(kx, w);
                        let mut acc = F::zero();
                        for y in y0..y1 {
                            let sy = y + ky - 1;
                            let grow = &g[y * w + x0..y * w + x1];
                            let soff = sy * w + x0 + kx - 1;
                            let srow = &src[soff..soff + (x1 - x0)];
                            for (&gv, &sv) in grow.iter().zip(srow) {
                                acc = acc + gv * sv;
                            }
                            if let Some(gi) = grad_in.as_mut() {
                                let irow = &mut gi[i * plane + soff..i * plane + soff + (x1 - x0)];
                                for (d, &gv) in irow.iter_mut().zip(grow) {
                                    *d = *d + wv * gv;
                                }
                            }
                        }
                        grad.weight[widx] = grad.weight[widx] + acc;
                    }
                }
            }
        }
        grad_in
    }
}

/// Fully connected layer, weights `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub in_len: usize,
    pub out_len: usize,
    pub weight: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Float> Dense<F> {
    pub fn zeros(in_len: usize, out_len: usize) -> Self {
        Self {
            in_len,
            out_len,
            weight: alloc::vec![F::zero(); in_len * out_len],
            bias: alloc::vec![F::zero(); out_len],
        }
    }

    pub fn forward(&self, x: &[F]) -> Vec<F> {
        (0..self.out_len)
            .map(|o| {
                let row = &self.weight[o * self.in_len..(o + 1) * self.in_len];
                row.iter().zip(x).fold(self.bias[o], |a, (&w, &v)| a + w * v)
            })
            .collect()
    }

    pub fn backward(&self, x: &[F], grad_out: &[F], grad: &mut Dense<F>) -> Vec<F> {
        let mut gx = alloc::vec![F::zero(); self.in_len];
        for o in 0..self.out_len {
            let g = grad_out[o];
            grad.bias[o] = grad.bias[o] + g;
            let row = &self.weight[o * self.in_len..(o + 1) * self.in_len];
            let grow = &mut grad.weight[o * self.in_len..(o + 1) * self.in_len];
            for j in 0..self.in_len {
                grow[j] = grow[j] + g * x[j];
                gx[j] = gx[j] + g * row[j];
            }
        }
        gx
    }
}

pub fn relu<F: Float>(x: &[F]) -> Vec<F> {
    x.iter().map(|&v| v.max(F::zero())).collect()
}

pub fn relu_backward<F: Float>(x: &[F], grad_out: &[F]) -> Vec<F> {
    x.iter()
        .zip(grad_out)
        .map(|(&v, &g)| if v > F::zero() { g } else { F::zero() })
        .collect()
}

/// 2x2 max-pool with stride 2 over `ch` planes of `h x w`. Returns the
/// pooled values and the flat input index each one came from (first
/// maximum in raster order).
pub fn max_pool2<F: Float>(x: &[F], ch: usize, h: usize, w: usize) -> (Vec<F>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(ch * oh * ow);
    let mut idx = Vec::with_capacity(ch * oh * ow);
    for c in 0..ch {
        let base = c * h * w;
        for y in 0..oh {
            for xo in 0..ow {
                let cands = [
                    base + 2 * y * w + 2 * xo,
                    base + 2 * y * w + 2 * xo + 1,
                    base + (2 * y + 1) * w + 2 * xo,
                    base + (2 * y + 1) * w + 2 * xo + 1,
                ];
                let mut best = cands[0];
                for &j in &cands[1..] {
                    if x[j] > x[best] {
                        best = j;
                    }
                }
                out.push(x[best]);
                idx.push(best);
            }
        }
    }
    (out, idx)
}

pub fn max_pool2_backward<F: Float>(input_len: usize, idx: &[usize], grad_out: &[F]) -> Vec<F> {
    let mut g = alloc::vec![F::zero(); input_len];
    for (&j, &v) in idx.iter().zip(grad_out) {
        g[j] = g[j] + v;
    }
    g
}

/// Numerically stable softmax.
pub fn softmax<F: Float>(logits: &[F]) -> Vec<F> {
    let m = logits.iter().fold(F::neg_infinity(), |a, &v| a.max(v));
    let e: Vec<F> = logits.iter().map(|&v| (v - m).exp()).collect();
    let s = e.iter().fold(F::zero(), |a, &v| a + v);
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of softmax probabilities against class `y`, and its
/// gradient with respect to the logits (`p - onehot(y)`).
pub fn cross_entropy<F: Float>(probs: &[F], y: usize) -> (F, Vec<F>) {
    let tiny = F::min_positive_value();
    let loss = -probs[y].max(tiny).ln();
    let grad = probs
        .iter()
        .enumerate()
        .map(|(k, &p)| if k == y { p - F::one() } else { p })
        .collect();
    (loss, grad)
}

/// Network parameters. The same type doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Cnn<F> {
    pub shape: CnnShape,
    pub conv1: Conv2d<F>,
    pub conv2: Conv2d<F>,
    pub fc1: Dense<F>,
    pub fc2: Dense<F>,
}

/// Shipped model precision.
pub type CnnModel = Cnn<f32>;

/// Intermediate activations of one sample.
#[derive(Debug, Clone)]
struct Activations<F> {
    input: Vec<F>,
    conv1: Vec<F>,
    pool1: Vec<F>,
    pool1_idx: Vec<usize>,
    conv2: Vec<F>,
    pool2_idx: Vec<usize>,
    flat: Vec<F>,
    hidden: Vec<F>,
    hidden_relu: Vec<F>,
}

/// Output of a batched forward pass with the cache needed for backprop.
#[derive(Debug, Clone)]
pub struct ForwardPass<F> {
    /// One row of class probabilities per sample, `[background, school]`.
    pub probs: Vec<[F; N_CLASSES]>,
    cache: Vec<Activations<F>>,
}

impl<F: Float> ForwardPass<F> {
    /// The piecewise-linear regime of the pass: every ReLU sign and every
    /// pooling choice. Two passes with equal patterns lie on the same smooth
    /// piece of the network function.
    pub fn activation_pattern(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for a in &self.cache {
            for v in a.conv1.iter().chain(&a.conv2).chain(&a.hidden) {
                out.push(usize::from(*v > F::zero()));
            }
            out.extend_from_slice(&a.pool1_idx);
            out.extend_from_slice(&a.pool2_idx);
        }
        out
    }

    /// Mean cross-entropy of the batch against `labels`.
    pub fn loss(&self, labels: &[usize]) -> F {
        let n = c::<F>(self.probs.len() as f64);
        self.probs
            .iter()
            .zip(labels)
            .fold(F::zero(), |a, (p, &y)| a + cross_entropy(p, y).0)
            / n
    }
}

impl<F: Float> Cnn<F> {
    pub fn zeros(shape: CnnShape) -> Result<Self> {
        shape.validate()?;
        Ok(Self {
            shape,
            conv1: Conv2d::zeros(shape.in_channels, shape.conv1_filters),
            conv2: Conv2d::zeros(shape.conv1_filters, shape.conv2_filters),
            fc1: Dense::zeros(shape.flat_len(), shape.hidden),
            fc2: Dense::zeros(shape.hidden, N_CLASSES),
        })
    }

    /// Uniform initialization in `+-sqrt(6 / fan_in)` per layer, zero biases.
    pub fn init(shape: CnnShape, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(shape, &mut rng)
    }

    fn init_with(shape: CnnShape, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut m = Self::zeros(shape)?;
        let fill = |w: &mut [F], fan_in: usize, rng: &mut ChaCha8Rng| {
            let bound = libm::sqrt(6.0 / fan_in as f64);
            for v in w {
                *v = c(rng.random_range(-bound..bound));
            }
        };
        fill(&mut m.conv1.weight, shape.in_channels * K * K, rng);
        fill(&mut m.conv2.weight, shape.conv1_filters * K * K, rng);
        fill(&mut m.fc1.weight, shape.flat_len(), rng);
        fill(&mut m.fc2.weight, shape.hidden, rng);
        Ok(m)
    }

    /// Parameter tensors in storage order.
    pub fn params(&self) -> [&[F]; 8] {
        [
            &self.conv1.weight,
            &self.conv1.bias,
            &self.conv2.weight,
            &self.conv2.bias,
            &self.fc1.weight,
            &self.fc1.bias,
            &self.fc2.weight,
            &self.fc2.bias,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut [F]; 8] {
        [
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
            &mut self.fc1.weight,
            &mut self.fc1.bias,
            &mut self.fc2.weight,
            &mut self.fc2.bias,
        ]
    }

    /// Checks that layer sizes chain and all parameters are finite.
    pub fn validate(&self) -> Result<()> {
        let s = self.shape;
        s.validate()?;
        let expect = [
            s.conv1_filters * s.in_channels * K * K,
            s.conv1_filters,
            s.conv2_filters * s.conv1_filters * K * K,
            s.conv2_filters,
            s.hidden * s.flat_len(),
            s.hidden,
            N_CLASSES * s.hidden,
            N_CLASSES,
        ];
        for (p, &n) in self.params().iter().zip(&expect) {
            if p.len() != n {
                return Err(Error::ShapeMismatch {
                    what: "cnn parameter tensor",
                    expected: n,
                    found: p.len(),
                });
            }
        }
        let dims_ok = self.conv1.in_ch == s.in_channels
            && self.conv1.out_ch == s.conv1_filters
            && self.conv2.in_ch == s.conv1_filters
            && self.conv2.out_ch == s.conv2_filters
            && self.fc1.in_len == s.flat_len()
            && self.fc1.out_len == s.hidden
            && self.fc2.in_len == s.hidden
            && self.fc2.out_len == N_CLASSES;
        if !dims_ok {
            return Err(invalid("cnn", "layer dimensions do not chain"));
        }
        if self.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("cnn parameters"));
        }
        Ok(())
    }

    fn forward_one(&self, input: &[F]) -> (Activations<F>, [F; N_CLASSES]) {
        let s = self.shape;
        let n = s.input_size;
        let conv1 = self.conv1.forward(input, n, n);
        let (pool1, pool1_idx) = max_pool2(&relu(&conv1), s.conv1_filters, n, n);
        let conv2 = self.conv2.forward(&pool1, n / 2, n / 2);
        let (flat, pool2_idx) = max_pool2(&relu(&conv2), s.conv2_filters, n / 2, n / 2);
        let hidden = self.fc1.forward(&flat);
        let hidden_relu = relu(&hidden);
        let logits = self.fc2.forward(&hidden_relu);
        let p = softmax(&logits);
        let acts = Activations {
            input: input.to_vec(),
            conv1,
            pool1,
            pool1_idx,
            conv2,
            pool2_idx,
            flat,
            hidden,
            hidden_relu,
        };
        (acts, [p[0], p[1]])
    }

    fn check_batch(&self, batch: &[F], batch_len: usize) -> Result<()> {
        let per = self.shape.input_len();
        if batch.len() != per * batch_len {
            return Err(Error::ShapeMismatch {
                what: "cnn batch",
                expected: per * batch_len,
                found: batch.len(),
            });
        }
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cnn input"));
        }
        Ok(())
    }

    /// Class probabilities for `batch_len` inputs laid out back to back,
    /// each `in_channels x input_size x input_size`.
    pub fn forward(&self, batch: &[F], batch_len: usize) -> Result<ForwardPass<F>> {
        self.check_batch(batch, batch_len)?;
        let per = self.shape.input_len();
        let (cache, probs) = batch.chunks_exact(per).map(|x| self.forward_one(x)).unzip();
        Ok(ForwardPass { probs, cache })
    }

    /// Gradient of the mean cross-entropy over the cached batch.
    pub fn backward(&self, pass: &ForwardPass<F>, labels: &[usize]) -> Result<Cnn<F>> {
        if labels.len() != pass.cache.len() {
            return Err(Error::ShapeMismatch {
                what: "label batch",
                expected: pass.cache.len(),
                found: labels.len(),
            });
        }
        if labels.iter().any(|&y| y >= N_CLASSES) {
            return Err(invalid("labels", "class index out of range"));
        }
        let s = self.shape;
        let n = s.input_size;
        let scale = F::one() / c::<F>(labels.len().max(1) as f64);
        let mut grad = Cnn::zeros(s)?;
        for ((acts, probs), &y) in pass.cache.iter().zip(&pass.probs).zip(labels) {
            let (_, g_logits) = cross_entropy(probs, y);
            let g_logits: Vec<F> = g_logits.into_iter().map(|v| v * scale).collect();
            let g_hr = self.fc2.backward(&acts.hidden_relu, &g_logits, &mut grad.fc2);
            let g_h = relu_backward(&acts.hidden, &g_hr);
            let g_flat = self.fc1.backward(&acts.flat, &g_h, &mut grad.fc1);
            let g_r2 = max_pool2_backward(acts.conv2.len(), &acts.pool2_idx, &g_flat);
            let g_c2 = relu_backward(&acts.conv2, &g_r2);
            let g_p1 = self
                .conv2
                .backward(&acts.pool1, n / 2, n / 2, &g_c2, &mut grad.conv2, true)
                .expect("input gradient requested");
            let g_r1 = max_pool2_backward(acts.conv1.len(), &acts.pool1_idx, &g_p1);
            let g_c1 = relu_backward(&acts.conv1, &g_r1);
            self.conv1.backward(&acts.input, n, n, &g_c1, &mut grad.conv1, false);
        }
        Ok(grad)
    }

    /// Hard labels: the school class wins only with strictly higher
    /// probability.
    pub fn predict(&self, batch: &[F], batch_len: usize) -> Result<Vec<Label>> {
        Ok(self
            .forward(batch, batch_len)?
            .probs
            .iter()
            .map(|p| Label::from_positive(p[1] > p[0]))
            .collect())
    }
}

pub fn cnn_forward<F: Float>(m: &Cnn<F>, batch: &[F], batch_len: usize) -> Result<ForwardPass<F>> {
    m.forward(batch, batch_len)
}

pub fn cnn_backward<F: Float>(m: &Cnn<F>, pass: &ForwardPass<F>, labels: &[usize]) -> Result<Cnn<F>> {
    m.backward(pass, labels)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CnnParams {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// L2 penalty applied to every parameter in the update.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for CnnParams {
    fn default() -> Self {
        Self {
            epochs: 50,
            lr: 0.01,
            momentum: 0.9,
            batch_size: 32,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CnnTraining {
    pub model: CnnModel,
    /// Mean training cross-entropy per epoch.
    pub loss_history: Vec<f64>,
}

/// Mini-batch SGD with momentum. Single-threaded and bit-reproducible for a
/// fixed seed.
pub fn train_cnn(samples: &[(&[f32], Label)], shape: CnnShape, params: &CnnParams) -> Result<CnnTraining> {
    shape.validate()?;
    let has_pos = samples.iter().any(|(_, l)| l.is_positive());
    let has_neg = samples.iter().any(|(_, l)| !l.is_positive());
    if !(has_pos && has_neg) {
        return Err(Error::SingleClass);
    }
    if params.batch_size == 0 {
        return Err(invalid("batch_size", "must be at least 1"));
    }
    if !(params.lr >= 0.0 && params.lr.is_finite()) {
        return Err(invalid("lr", "must be finite and non-negative"));
    }
    if !(0.0..1.0).contains(&params.momentum) {
        return Err(invalid("momentum", "must lie in [0, 1)"));
    }
    let per = shape.input_len();
    for (x, _) in samples {
        if x.len() != per {
            return Err(Error::ShapeMismatch {
                what: "training input",
                expected: per,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training input"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut model = CnnModel::init_with(shape, &mut rng)?;
    let mut velocity = CnnModel::zeros(shape)?;
    let (lr, mu, wd) = (params.lr as f32, params.momentum as f32, params.weight_decay as f32);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut batch = Vec::with_capacity(per * params.batch_size);
    let mut labels = Vec::with_capacity(params.batch_size);
    let mut history = Vec::with_capacity(params.epochs);

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        for chunk in order.chunks(params.batch_size) {
            batch.clear();
            labels.clear();
            for &i in chunk {
                batch.extend_from_slice(samples[i].0);
                labels.push(samples[i].1.index());
            }
            let pass = model.forward(&batch, chunk.len())?;
            loss_sum += f64::from(pass.loss(&labels)) * chunk.len() as f64;
            let grad = model.backward(&pass, &labels)?;
            for ((p, v), g) in model.params_mut().into_iter().zip(velocity.params_mut()).zip(grad.params()) {
                for ((pj, vj), &gj) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                    *vj = mu * *vj - lr * (gj + wd * *pj);
                    *pj += *vj;
                }
            }
        }
        history.push(loss_sum / samples.len() as f64);
    }
    model.validate()?;
    Ok(CnnTraining {
        model,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tiny() -> CnnShape {
        CnnShape {
            in_channels: 1,
            input_size: 8,
            conv1_filters: 2,
            conv2_filters: 2,
            hidden: 4,
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = Cnn::<f64>::zeros(CnnShape::default()).unwrap();
        let x = vec![0.3; CnnShape::default().input_len() * 2];
        let pass = m.forward(&x, 2).unwrap();
        for p in &pass.probs {
            assert_eq!(*p, [0.5, 0.5]);
        }
        assert!((pass.loss(&[0, 1]) - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn zero_model_output_bias_gradient() {
        // p = (0.5, 0.5); labels (0, 1): dL/db = mean(p - y) = (0, 0).
        // labels (1, 1): dL/db = (0.5, -0.5).
        let m = Cnn::<f64>::zeros(tiny()).unwrap();
        let x = vec![0.1; tiny().input_len() * 2];
        let pass = m.forward(&x, 2).unwrap();
        assert_eq!(m.backward(&pass, &[0, 1]).unwrap().fc2.bias, vec![0.0, 0.0]);
        assert_eq!(m.backward(&pass, &[1, 1]).unwrap().fc2.bias, vec![0.5, -0.5]);
    }

    #[test]
    fn rows_sum_to_one() {
        let m = Cnn::<f32>::init(tiny(), 3).unwrap();
        let x: Vec<f32> = (0..tiny().input_len() * 3).map(|i| (i % 7) as f32 / 7.0).collect();
        for p in m.forward(&x, 3).unwrap().probs {
            assert!(p[0] > 0.0 && p[1] > 0.0);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn shape_and_value_errors() {
        let m = Cnn::<f32>::init(tiny(), 0).unwrap();
        assert!(m.forward(&[0.0; 10], 1).is_err());
        let mut x = vec![0.0; tiny().input_len()];
        x[3] = f32::NAN;
        assert_eq!(m.forward(&x, 1).unwrap_err(), Error::NonFinite("cnn input"));
        let pass = m.forward(&vec![0.0; tiny().input_len()], 1).unwrap();
        assert!(m.backward(&pass, &[0, 1]).is_err());
        assert!(CnnShape { input_size: 10, ..tiny() }.validate().is_err());
    }

    #[test]
    fn max_pool_routes_to_first_maximum() {
        let x = [1.0, 3.0, 3.0, 2.0];
        let (out, idx) = max_pool2(&x, 1, 2, 2);
        assert_eq!(out, vec![3.0]);
        assert_eq!(idx, vec![1]);
        assert_eq!(max_pool2_backward(4, &idx, &[5.0]), vec![0.0, 5.0, 0.0, 0.0]);
    }
}
