//! Ready-made gradient checks for every differentiable op, a single block
//! and a whole network. Each check contracts the output with a random weight
//! tensor `w`, so the scalar objective is `Σ w·y` and the analytic gradient is
//! the backward pass fed with `w`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_gradient, GradCheckReport, Probe};
use crate::model::{mamb_backward, mamb_forward, network_backward, network_forward_cached, ModelParams, NetworkConfig};
use crate::ops::*;
use crate::tensor::{Shape, Tensor};
use crate::train::l1_loss;

const EPS: f64 = 1e-5;

/// A differentiable primitive under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpCase {
    Conv2d { pad: usize },
    DepthwiseConv2d,
    Dense,
    Relu,
    Sigmoid,
    GlobalPool(PoolStatistic),
    Standardize,
    PixelShuffle,
    SpaceToDepth,
    L1Loss,
}

impl OpCase {
    pub fn all() -> Vec<OpCase> {
        let mut v = vec![OpCase::Conv2d { pad: 1 }, OpCase::Conv2d { pad: 0 }, OpCase::DepthwiseConv2d, OpCase::Dense];
        v.extend([OpCase::Relu, OpCase::Sigmoid]);
        v.extend(PoolStatistic::ALL.map(OpCase::GlobalPool));
        v.extend([OpCase::Standardize, OpCase::PixelShuffle, OpCase::SpaceToDepth, OpCase::L1Loss]);
        v
    }

    pub fn name(&self) -> String {
        match self {
            OpCase::Conv2d { pad } => format!("conv2d(pad={pad})"),
            OpCase::DepthwiseConv2d => "depthwise_conv2d".into(),
            OpCase::Dense => "dense".into(),
            OpCase::Relu => "relu".into(),
            OpCase::Sigmoid => "sigmoid".into(),
            OpCase::GlobalPool(s) => format!("global_pool({s})"),
            OpCase::Standardize => "standardize_channels".into(),
            OpCase::PixelShuffle => "pixel_shuffle".into(),
            OpCase::SpaceToDepth => "space_to_depth".into(),
            OpCase::L1Loss => "l1_loss".into(),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, shape: Shape, r: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_, _, _, _| rng.random_range(-r..r))
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-r..r)).collect()
}

/// Splits a flat point into consecutive chunks of the given lengths.
fn split<'a>(pt: &'a [f64], lens: &[usize]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(lens.len());
    let mut off = 0;
    for &n in lens {
        out.push(&pt[off..off + n]);
        off += n;
    }
    out
}

fn tensor(shape: Shape, data: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(shape, data.to_vec()).expect("chunk length matches shape")
}

fn dot(a: &Tensor<f64>, w: &Tensor<f64>) -> f64 {
    a.data().iter().zip(w.data()).map(|(x, y)| x * y).sum()
}

fn concat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Checks one op at a random point drawn from `seed`.
pub fn check_op(case: OpCase, seed: u64, tol: f64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match case {
        OpCase::Conv2d { pad } => {
            let xs = Shape::new(2, 3, 5, 4);
            let (c_out, k) = (4, 3);
            let x = uniform(&mut rng, xs, 1.0);
            let mut p = ConvParams::zeros(c_out, xs.c, k);
            p.weight = uniform(&mut rng, p.weight.shape(), 0.5);
            p.bias = uniform_vec(&mut rng, c_out, 0.5);
            let ws = p.weight.shape();
            let w = uniform(&mut rng, conv2d(&x, &p, pad).unwrap().shape(), 1.0);
            let (gx, gp) = conv2d_backward(&x, &p, pad, &w).unwrap();
            let analytic = concat(&[gx.data(), gp.weight.data(), &gp.bias]);
            let mut point = concat(&[x.data(), p.weight.data(), &p.bias]);
            let lens = [xs.numel(), ws.numel(), c_out];
            check_gradient(&mut point, &analytic, |pt: &[f64]| {
                let c = split(pt, &lens);
                let q = ConvParams { weight: tensor(ws, c[1]), bias: c[2].to_vec() };
                dot(&conv2d(&tensor(xs, c[0]), &q, pad).unwrap(), &w)
            }, tol)
        }
        OpCase::DepthwiseConv2d => {
            let xs = Shape::new(2, 4, 5, 5);
            let x = uniform(&mut rng, xs, 1.0);
            let mut p = DepthwiseParams::zeros(xs.c);
            p.weight = uniform(&mut rng, p.weight.shape(), 0.5);
            p.bias = uniform_vec(&mut rng, xs.c, 0.5);
            let ws = p.weight.shape();
            let w = uniform(&mut rng, xs, 1.0);
            let (gx, gp) = depthwise_conv2d_backward(&x, &p, &w).unwrap();
            let analytic = concat(&[gx.data(), gp.weight.data(), &gp.bias]);
            let mut point = concat(&[x.data(), p.weight.data(), &p.bias]);
            let lens = [xs.numel(), ws.numel(), xs.c];
            check_gradient(&mut point, &analytic, |pt: &[f64]| {
                let c = split(pt, &lens);
                let q = DepthwiseParams { weight: tensor(ws, c[1]), bias: c[2].to_vec() };
                dot(&depthwise_conv2d(&tensor(xs, c[0]), &q).unwrap(), &w)
            }, tol)
        }
        OpCase::Dense => {
            let (rows, cols) = (4, 6);
            let xs = Shape::new(3, cols, 1, 1);
            let x = uniform(&mut rng, xs, 1.0);
            let mut p = DenseParams::zeros(rows, cols);
            p.weight = uniform_vec(&mut rng, rows * cols, 0.5);
            p.bias = uniform_vec(&mut rng, rows, 0.5);
            let w = uniform(&mut rng, Shape::new(3, rows, 1, 1), 1.0);
            let (gx, gp) = dense_backward(&x, &p, &w).unwrap();
            let analytic = concat(&[gx.data(), &gp.weight, &gp.bias]);
            let mut point = concat(&[x.data(), &p.weight, &p.bias]);
            let lens = [xs.numel(), rows * cols, rows];
            check_gradient(&mut point, &analytic, |pt: &[f64]| {
                let c = split(pt, &lens);
                let q = DenseParams { rows, cols, weight: c[1].to_vec(), bias: c[2].to_vec() };
                dot(&dense(&tensor(xs, c[0]), &q).unwrap(), &w)
            }, tol)
        }
        OpCase::Relu => {
            let xs = Shape::new(1, 2, 4, 4);
            let x = uniform(&mut rng, xs, 1.0);
            let w = uniform(&mut rng, xs, 1.0);
            let analytic = relu_backward(&x, &w).unwrap().into_vec();
            let mut point = x.into_vec();
            check_gradient(&mut point, &analytic, |pt: &[f64]| Probe {
                value: dot(&relu(&tensor(xs, pt)), &w),
                pattern: Some(pt.iter().map(|&v| v > 0.0).collect()),
            }, tol)
        }
        OpCase::Sigmoid => {
            let xs = Shape::new(1, 2, 4, 4);
            let x = uniform(&mut rng, xs, 4.0);
            let w = uniform(&mut rng, xs, 1.0);
            let analytic = sigmoid_backward(&sigmoid(&x), &w).unwrap().into_vec();
            let mut point = x.into_vec();
            check_gradient(&mut point, &analytic, |pt: &[f64]| dot(&sigmoid(&tensor(xs, pt)), &w), tol)
        }
        OpCase::GlobalPool(stat) => {
            let xs = Shape::new(2, 3, 4, 5);
            let x = uniform(&mut rng, xs, 1.0);
            let w = uniform(&mut rng, Shape::new(2, 3, 1, 1), 1.0);
            let analytic = global_pool_backward(&x, stat, EPS, &w).unwrap().into_vec();
            let mut point = x.into_vec();
            check_gradient(&mut point, &analytic, |pt: &[f64]| {
                let t = tensor(xs, pt);
                let value = dot(&global_pool(&t, stat, EPS).unwrap(), &w);
                // Max is piecewise linear in which element wins.
                let pattern = (stat == PoolStatistic::Max).then(|| argmax_pattern(&t));
                Probe { value, pattern }
            }, tol)
        }
        OpCase::Standardize => {
            let vs = Shape::new(2, 6, 1, 1);
            let v = uniform(&mut rng, vs, 1.0);
            let w = uniform(&mut rng, vs, 1.0);
            let analytic = standardize_backward(&v, EPS, &w).unwrap().into_vec();
            let mut point = v.into_vec();
            check_gradient(&mut point, &analytic, |pt: &[f64]| dot(&standardize_channels(&tensor(vs, pt), EPS), &w), tol)
        }
        OpCase::PixelShuffle => {
            let xs = Shape::new(1, 8, 3, 3);
            let x = uniform(&mut rng, xs, 1.0);
            let w = uniform(&mut rng, Shape::new(1, 2, 6, 6), 1.0);
            let analytic = space_to_depth(&w, 2).unwrap().into_vec();
            let mut point = x.into_vec();
            check_gradient(&mut point, &analytic, |pt: &[f64]| dot(&pixel_shuffle(&tensor(xs, pt), 2).unwrap(), &w), tol)
        }
        OpCase::SpaceToDepth => {
            let xs = Shape::new(1, 2, 6, 6);
            let x = uniform(&mut rng, xs, 1.0);
            let w = uniform(&mut rng, Shape::new(1, 8, 3, 3), 1.0);
            let analytic = pixel_shuffle(&w, 2).unwrap().into_vec();
            let mut point = x.into_vec();
            check_gradient(&mut point, &analytic, |pt: &[f64]| dot(&space_to_depth(&tensor(xs, pt), 2).unwrap(), &w), tol)
        }
        OpCase::L1Loss => {
            let s = Shape::new(1, 2, 3, 3);
            let pred = uniform(&mut rng, s, 1.0);
            let target = uniform(&mut rng, s, 1.0);
            let analytic = l1_loss(&pred, &target).unwrap().1.into_vec();
            let mut point = pred.into_vec();
            check_gradient(&mut point, &analytic, |pt: &[f64]| Probe {
                value: l1_loss(&tensor(s, pt), &target).unwrap().0,
                pattern: Some(pt.iter().zip(target.data()).map(|(p, t)| p > t).collect()),
            }, tol)
        }
    }
}

fn argmax_pattern(x: &Tensor<f64>) -> Vec<bool> {
    let s = x.shape();
    let mut out = Vec::with_capacity(x.len());
    for n in 0..s.n {
        for c in 0..s.c {
            let plane = x.plane(n, c);
            let m = plane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            out.extend(plane.iter().map(|&v| v == m));
        }
    }
    out
}

/// Random parameters: He-normal weights plus small random biases, so that
/// bias gradients are exercised away from zero.
fn random_params(cfg: &NetworkConfig, seed: u64, rng: &mut ChaCha8Rng) -> ModelParams<f64> {
    let mut p = ModelParams::<f64>::init(cfg, seed);
    for v in p.tensors_mut() {
        if v.name.ends_with("bias") {
            v.data.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
        }
    }
    p
}

fn flatten_prefix(p: &ModelParams<f64>, prefix: &str) -> Vec<f64> {
    p.tensors().into_iter().filter(|v| v.name.starts_with(prefix)).flat_map(|v| v.data.iter().copied()).collect()
}

fn assign_prefix(p: &mut ModelParams<f64>, prefix: &str, flat: &[f64]) {
    let mut off = 0;
    for v in p.tensors_mut().into_iter().filter(|v| v.name.starts_with(prefix)) {
        let n = v.data.len();
        v.data.copy_from_slice(&flat[off..off + n]);
        off += n;
    }
    assert_eq!(off, flat.len(), "flat block vector has wrong length");
}

/// Checks one block (`cfg.channels` must match `shape.c`) with respect to its
/// input and all of its parameters.
pub fn check_block(cfg: &NetworkConfig, shape: Shape, seed: u64, tol: f64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let cfg = NetworkConfig { blocks: 1, ..cfg.clone() };
    let mut params = random_params(&cfg, seed, &mut rng);
    let x = uniform(&mut rng, shape, 1.0);
    let (y, cache) = mamb_forward(&x, &params.blocks[0], &cfg).unwrap();
    let w = uniform(&mut rng, y.shape(), 1.0);
    let (gx, gb) = mamb_backward(&cache, &params.blocks[0], &cfg, &w).unwrap();
    let mut grads = params.zeros_like();
    grads.blocks[0] = gb;

    let prefix = "blocks.0.";
    let analytic = concat(&[gx.data(), &flatten_prefix(&grads, prefix)]);
    let mut point = concat(&[x.data(), &flatten_prefix(&params, prefix)]);
    let nx = shape.numel();
    check_gradient(&mut point, &analytic, |pt: &[f64]| {
        assign_prefix(&mut params, prefix, &pt[nx..]);
        let (y, cache) = mamb_forward(&tensor(shape, &pt[..nx]), &params.blocks[0], &cfg).unwrap();
        let mut pattern = Vec::new();
        cache.relu_pattern(&mut pattern);
        Probe { value: dot(&y, &w), pattern: Some(pattern) }
    }, tol)
}

/// Checks a whole network on a random `h × w` RGB input with respect to the
/// input and every parameter.
pub fn check_network(cfg: &NetworkConfig, h: usize, w: usize, seed: u64, tol: f64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let mut params = random_params(cfg, seed, &mut rng);
    let xs = Shape::new(1, 3, h, w);
    let x = uniform(&mut rng, xs, 0.5);
    let (y, cache) = network_forward_cached(&x, &params, cfg).unwrap();
    let wt = uniform(&mut rng, y.shape(), 1.0);
    let (grads, gx) = network_backward(&params, cfg, &cache, &wt).unwrap();

    let analytic = concat(&[gx.data(), &grads.flatten()]);
    let mut point = concat(&[x.data(), &params.flatten()]);
    let nx = xs.numel();
    check_gradient(&mut point, &analytic, |pt: &[f64]| {
        params.assign_flat(&pt[nx..]);
        let (y, cache) = network_forward_cached(&tensor(xs, &pt[..nx]), &params, cfg).unwrap();
        Probe { value: dot(&y, &wt), pattern: Some(cache.relu_pattern()) }
    }, tol)
}
