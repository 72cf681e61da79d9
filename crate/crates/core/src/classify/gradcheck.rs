//! Central finite-difference checks of the CNN's analytic gradients.
//!
//! Every check differentiates a scalar: the loss itself for the softmax
//! cross-entropy and the whole network, and a fixed random projection
//! `sum_i proj_i * out_i` for individual layers, whose analytic gradient is
//! the layer's backward pass with `grad_out = proj`.
//!
//! ReLU and max-pooling are only piecewise smooth. A probe whose `+-step`
//! perturbation changes a ReLU sign or a pooling choice straddles a kink,
//! where a finite difference is meaningless; such probes are counted as
//! skipped rather than compared.

use alloc::vec::Vec;

use super::cnn::{cross_entropy, max_pool2, max_pool2_backward, relu, relu_backward, softmax, Cnn, Conv2d, Dense};
use crate::error::Result;

/// Outcome for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: &'static str,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
}

impl GradCheck {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checked: 0,
            skipped: 0,
            max_rel_error: 0.0,
        }
    }

    fn record(&mut self, analytic: f64, numeric: f64) {
        self.checked += 1;
        self.max_rel_error = self.max_rel_error.max(relative_error(analytic, numeric));
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.checked > 0 && self.max_rel_error < tol
    }
}

/// `|a - n| / max(|a|, |n|, 1e-6)`. The floor keeps gradients that are
/// zero up to rounding from being judged on their noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = libm::fabs(analytic).max(libm::fabs(numeric)).max(1e-6);
    libm::fabs(analytic - numeric) / scale
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central difference of `f` with respect to `values[i]`, restoring the
/// value afterwards.
fn central<T>(values: &mut T, get: impl Fn(&mut T) -> &mut f64, step: f64, f: &mut impl FnMut(&T) -> f64) -> f64 {
    let orig = *get(values);
    *get(values) = orig + step;
    let up = f(values);
    *get(values) = orig - step;
    let down = f(values);
    *get(values) = orig;
    (up - down) / (2.0 * step)
}

/// Checks weight, bias and input gradients of a convolution.
pub fn check_conv2d(layer: &Conv2d<f64>, input: &[f64], h: usize, w: usize, proj: &[f64], step: f64) -> [GradCheck; 3] {
    let mut grad = Conv2d::zeros(layer.in_ch, layer.out_ch);
    let g_in = layer
        .backward(input, h, w, proj, &mut grad, true)
        .expect("input gradient requested");
    let mut checks = [GradCheck::new("conv weight"), GradCheck::new("conv bias"), GradCheck::new("conv input")];

    let mut l = layer.clone();
    let mut f = |l: &Conv2d<f64>| dot(&l.forward(input, h, w), proj);
    for i in 0..l.weight.len() {
        let n = central(&mut l, |l| &mut l.weight[i], step, &mut f);
        checks[0].record(grad.weight[i], n);
    }
    for i in 0..l.bias.len() {
        let n = central(&mut l, |l| &mut l.bias[i], step, &mut f);
        checks[1].record(grad.bias[i], n);
    }
    let mut x = input.to_vec();
    let mut f = |x: &Vec<f64>| dot(&layer.forward(x, h, w), proj);
    for i in 0..x.len() {
        let n = central(&mut x, |x| &mut x[i], step, &mut f);
        checks[2].record(g_in[i], n);
    }
    checks
}

/// Checks weight, bias and input gradients of a dense layer.
pub fn check_dense(layer: &Dense<f64>, x: &[f64], proj: &[f64], step: f64) -> [GradCheck; 3] {
    let mut grad = Dense::zeros(layer.in_len, layer.out_len);
    let g_in = layer.backward(x, proj, &mut grad);
    let mut checks = [GradCheck::new("dense weight"), GradCheck::new("dense bias"), GradCheck::new("dense input")];

    let mut l = layer.clone();
    let mut f = |l: &Dense<f64>| dot(&l.forward(x), proj);
    for i in 0..l.weight.len() {
        let n = central(&mut l, |l| &mut l.weight[i], step, &mut f);
        checks[0].record(grad.weight[i], n);
    }
    for i in 0..l.bias.len() {
        let n = central(&mut l, |l| &mut l.bias[i], step, &mut f);
        checks[1].record(grad.bias[i], n);
    }
    let mut xs = x.to_vec();
    let mut f = |x: &Vec<f64>| dot(&layer.forward(x), proj);
    for i in 0..xs.len() {
        let n = central(&mut xs, |x| &mut x[i], step, &mut f);
        checks[2].record(g_in[i], n);
    }
    checks
}

/// Checks the ReLU input gradient, skipping inputs within `step` of zero.
pub fn check_relu(x: &[f64], proj: &[f64], step: f64) -> GradCheck {
    let g = relu_backward(x, proj);
    let mut check = GradCheck::new("relu input");
    let mut xs = x.to_vec();
    let mut f = |x: &Vec<f64>| dot(&relu(x), proj);
    for i in 0..xs.len() {
        if libm::fabs(xs[i]) <= step {
            check.skipped += 1;
            continue;
        }
        let n = central(&mut xs, |x| &mut x[i], step, &mut f);
        check.record(g[i], n);
    }
    check
}

/// Checks the max-pool input gradient, skipping probes that change which
/// element wins a pooling window.
pub fn check_max_pool2(x: &[f64], ch: usize, h: usize, w: usize, proj: &[f64], step: f64) -> GradCheck {
    let (_, idx) = max_pool2(x, ch, h, w);
    let g = max_pool2_backward(x.len(), &idx, proj);
    let mut check = GradCheck::new("max-pool input");
    let mut xs = x.to_vec();
    for i in 0..xs.len() {
        let orig = xs[i];
        let stable = [orig + step, orig - step].iter().all(|&v| {
            xs[i] = v;
            max_pool2(&xs, ch, h, w).1 == idx
        });
        xs[i] = orig;
        if !stable {
            check.skipped += 1;
            continue;
        }
        let n = central(&mut xs, |x| &mut x[i], step, &mut |x: &Vec<f64>| dot(&max_pool2(x, ch, h, w).0, proj));
        check.record(g[i], n);
    }
    check
}

/// Checks the gradient of `cross_entropy(softmax(logits), y)` with respect
/// to the logits.
pub fn check_softmax_cross_entropy(logits: &[f64], y: usize, step: f64) -> GradCheck {
    let (_, g) = cross_entropy(&softmax(logits), y);
    let mut check = GradCheck::new("softmax cross-entropy logits");
    let mut z = logits.to_vec();
    let mut f = |z: &Vec<f64>| cross_entropy(&softmax(z), y).0;
    for i in 0..z.len() {
        let n = central(&mut z, |z| &mut z[i], step, &mut f);
        check.record(g[i], n);
    }
    check
}

const TENSOR_NAMES: [&str; 8] = [
    "conv1 weight",
    "conv1 bias",
    "conv2 weight",
    "conv2 bias",
    "fc1 weight",
    "fc1 bias",
    "fc2 weight",
    "fc2 bias",
];

/// Checks every parameter of the composed network against the mean batch
/// cross-entropy. Probes that change the activation pattern are skipped.
pub fn check_network(model: &Cnn<f64>, batch: &[f64], labels: &[usize], step: f64) -> Result<[GradCheck; 8]> {
    let n = labels.len();
    let pass = model.forward(batch, n)?;
    let pattern = pass.activation_pattern();
    let grad = model.backward(&pass, labels)?;
    let mut checks = TENSOR_NAMES.map(GradCheck::new);
    let mut m = model.clone();
    for t in 0..8 {
        let len = grad.params()[t].len();
        for i in 0..len {
            let orig = m.params()[t][i];
            let eval = |v: f64, m: &mut Cnn<f64>| -> Result<(f64, bool)> {
                m.params_mut()[t][i] = v;
                let p = m.forward(batch, n)?;
                Ok((p.loss(labels), p.activation_pattern() == pattern))
            };
            let (up, same_up) = eval(orig + step, &mut m)?;
            let (down, same_down) = eval(orig - step, &mut m)?;
            m.params_mut()[t][i] = orig;
            if !(same_up && same_down) {
                checks[t].skipped += 1;
                continue;
            }
            checks[t].record(grad.params()[t][i], (up - down) / (2.0 * step));
        }
    }
    Ok(checks)
}
