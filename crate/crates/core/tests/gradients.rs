//! Analytic CNN gradients against central finite differences, in f64.

use echofinder_core::classify::cnn::{Cnn, Conv2d, Dense};
use echofinder_core::classify::gradcheck::{
    check_conv2d, check_dense, check_max_pool2, check_network, check_relu, check_softmax_cross_entropy, GradCheck,
};
use echofinder_core::classify::CnnShape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-4;
const TOL: f64 = 1e-3;

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn assert_pass(checks: &[GradCheck]) {
    for c in checks {
        assert!(c.passes(TOL), "{c:?}");
    }
}

fn reduced() -> CnnShape {
    CnnShape {
        in_channels: 2,
        input_size: 8,
        conv1_filters: 2,
        conv2_filters: 3,
        hidden: 5,
    }
}

#[test]
fn conv2d_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (cin, cout, h, w) = (2, 3, 5, 6);
    let mut layer = Conv2d::<f64>::zeros(cin, cout);
    layer.weight = uniform(&mut rng, layer.weight.len());
    layer.bias = uniform(&mut rng, cout);
    let input = uniform(&mut rng, cin * h * w);
    let proj = uniform(&mut rng, cout * h * w);
    assert_pass(&check_conv2d(&layer, &input, h, w, &proj, STEP));
}

#[test]
fn dense_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut layer = Dense::<f64>::zeros(7, 4);
    layer.weight = uniform(&mut rng, 28);
    layer.bias = uniform(&mut rng, 4);
    let x = uniform(&mut rng, 7);
    let proj = uniform(&mut rng, 4);
    assert_pass(&check_dense(&layer, &x, &proj, STEP));
}

#[test]
fn relu_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = uniform(&mut rng, 50);
    let proj = uniform(&mut rng, 50);
    assert_pass(&[check_relu(&x, &proj, STEP)]);
}

#[test]
fn max_pool_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (ch, h, w) = (2, 6, 8);
    let x = uniform(&mut rng, ch * h * w);
    let proj = uniform(&mut rng, ch * (h / 2) * (w / 2));
    let c = check_max_pool2(&x, ch, h, w, &proj, STEP);
    assert_eq!(c.checked + c.skipped, x.len());
    assert_pass(&[c]);
}

#[test]
fn softmax_cross_entropy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for y in 0..2 {
        let z = uniform(&mut rng, 2).iter().map(|v| 3.0 * v).collect::<Vec<_>>();
        assert_pass(&[check_softmax_cross_entropy(&z, y, STEP)]);
    }
}

#[test]
fn composed_network_gradients() {
    let shape = reduced();
    let m = Cnn::<f64>::init(shape, 15).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let batch: Vec<f64> = (0..3 * shape.input_len()).map(|_| rng.random::<f64>()).collect();
    let checks = check_network(&m, &batch, &[1, 0, 1], STEP).unwrap();
    let total: usize = checks.iter().map(|c| c.checked + c.skipped).sum();
    let params: usize = m.params().iter().map(|p| p.len()).sum();
    assert_eq!(total, params);
    // Kink crossings are rare; nearly every parameter is compared.
    let skipped: usize = checks.iter().map(|c| c.skipped).sum();
    assert!(skipped * 20 < params, "{skipped} of {params} skipped");
    assert_pass(&checks);
}

#[test]
fn duplicated_batch_has_the_same_mean_gradient() {
    let shape = reduced();
    let m = Cnn::<f64>::init(shape, 17).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let x: Vec<f64> = (0..shape.input_len()).map(|_| rng.random::<f64>()).collect();
    let one = m.backward(&m.forward(&x, 1).unwrap(), &[1]).unwrap();
    let twice: Vec<f64> = x.iter().chain(&x).copied().collect();
    let two = m.backward(&m.forward(&twice, 2).unwrap(), &[1, 1]).unwrap();
    for (a, b) in one.params().iter().zip(two.params()) {
        for (u, v) in a.iter().zip(b.iter()) {
            assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }
}
