//! Multi-path adaptive modulation block.
//!
//! `out = f_in + σ(M_csi ⊕ M_icd ⊕ M_csd) ⊗ X` with `X = conv2(ReLU(conv1(f_in)))`.
//! The per-channel maps `M_csi` and `M_icd` are broadcast over `H×W`, which is
//! what nearest-neighbour resizing of a 1×1 map amounts to. Disabled paths
//! contribute nothing to the sum; with no path enabled the block is a plain
//! residual block `f_in + X`.

use crate::error::{Error, Result};
use crate::model::config::{IcdStatistic, NetworkConfig};
use crate::model::params::{BlockParams, IcdParams};
use crate::ops::{
    conv2d, conv2d_backward, dense, dense_backward, depthwise_conv2d, depthwise_conv2d_backward,
    global_pool, global_pool_backward, relu, relu_backward, sigmoid, sigmoid_backward, PoolStatistic,
};
use crate::tensor::{Scalar, Shape, Tensor};

/// Intermediate values of one ICD branch.
#[derive(Clone, Debug)]
struct IcdBranch<T> {
    stat: PoolStatistic,
    input: Tensor<T>,
    pre: Tensor<T>,
    hidden: Tensor<T>,
}

/// Everything the backward pass needs from one block evaluation.
#[derive(Clone, Debug)]
pub struct BlockCache<T> {
    input: Tensor<T>,
    pre1: Tensor<T>,
    act1: Tensor<T>,
    x: Tensor<T>,
    csi_pooled: Option<Tensor<T>>,
    m_csi: Option<Tensor<T>>,
    icd: Vec<IcdBranch<T>>,
    m_icd: Option<Tensor<T>>,
    m_csd: Option<Tensor<T>>,
    gate: Option<Tensor<T>>,
}

/// Modulation maps of one block, batch axis retained.
#[derive(Clone, Debug)]
pub struct ModulationMaps<T> {
    /// Raw CSI statistic before any standardization, `(N, C, 1, 1)`.
    pub csi_pooled: Option<Tensor<T>>,
    /// CSI map as added to the gate pre-activation, `(N, C, 1, 1)`.
    pub m_csi: Option<Tensor<T>>,
    /// `(N, C, 1, 1)`.
    pub m_icd: Option<Tensor<T>>,
    /// `(N, C, H, W)`.
    pub m_csd: Option<Tensor<T>>,
    /// `σ(sum)`, `(N, C, H, W)`; `None` when no path is enabled.
    pub gate: Option<Tensor<T>>,
}

impl<T: Scalar> BlockCache<T> {
    pub fn maps(&self) -> ModulationMaps<T> {
        ModulationMaps {
            csi_pooled: self.csi_pooled.clone(),
            m_csi: self.m_csi.clone(),
            m_icd: self.m_icd.clone(),
            m_csd: self.m_csd.clone(),
            gate: self.gate.clone(),
        }
    }

    /// Residual-branch features `X` before modulation.
    pub fn residual(&self) -> &Tensor<T> {
        &self.x
    }

    /// Sign pattern of every ReLU input in the block.
    pub fn relu_pattern(&self, out: &mut Vec<bool>) {
        out.extend(self.pre1.data().iter().map(|&v| v > T::zero()));
        for b in &self.icd {
            out.extend(b.pre.data().iter().map(|&v| v > T::zero()));
        }
    }
}

fn broadcast_add<T: Scalar>(z: &mut Tensor<T>, per_channel: &Tensor<T>) {
    let s = z.shape();
    for n in 0..s.n {
        for c in 0..s.c {
            let v = per_channel.get(n, c, 0, 0);
            for e in z.plane_mut(n, c) {
                *e = *e + v;
            }
        }
    }
}

fn spatial_sum<T: Scalar>(g: &Tensor<T>) -> Tensor<T> {
    let s = g.shape();
    let mut out = Tensor::zeros(Shape::new(s.n, s.c, 1, 1));
    for n in 0..s.n {
        for c in 0..s.c {
            out.set(n, c, 0, 0, g.plane(n, c).iter().copied().sum());
        }
    }
    out
}

fn icd_stats(stat: IcdStatistic) -> Vec<PoolStatistic> {
    match stat {
        IcdStatistic::Pool(p) => vec![p],
        IcdStatistic::MaxAvg => vec![PoolStatistic::Max, PoolStatistic::Avg],
    }
}

/// `fc2(ReLU(fc1(v)))` with no output non-linearity.
pub fn icd_path<T: Scalar>(v: &Tensor<T>, p: &IcdParams<T>) -> Result<Tensor<T>> {
    let pre = dense(v, &p.fc1)?;
    dense(&relu(&pre), &p.fc2)
}

/// Forward pass of one block. The returned cache feeds [`mamb_backward`] and
/// exposes the modulation maps.
pub fn mamb_forward<T: Scalar>(
    f_in: &Tensor<T>,
    p: &BlockParams<T>,
    cfg: &NetworkConfig,
) -> Result<(Tensor<T>, BlockCache<T>)> {
    let s = f_in.shape();
    if s.c != cfg.channels {
        return Err(Error::Shape(format!(
            "block expects {} channels, got {}",
            cfg.channels, s.c
        )));
    }
    let eps = T::from_f64_lossy(cfg.eps);
    let pre1 = conv2d(f_in, &p.conv1, 1)?;
    let act1 = relu(&pre1);
    let x = conv2d(&act1, &p.conv2, 1)?;

    let mut cache = BlockCache {
        input: f_in.clone(),
        pre1,
        act1,
        x,
        csi_pooled: None,
        m_csi: None,
        icd: Vec::new(),
        m_icd: None,
        m_csd: None,
        gate: None,
    };

    if !cfg.paths.any() {
        let out = f_in.add(&cache.x)?;
        return Ok((out, cache));
    }

    let mut z = Tensor::zeros(s);
    if cfg.paths.csi {
        let pooled = if cfg.csi_stat == PoolStatistic::StdVar {
            global_pool(&cache.x, PoolStatistic::Var, eps)?
        } else {
            global_pool(&cache.x, cfg.csi_stat, eps)?
        };
        let m = global_pool(&cache.x, cfg.csi_stat, eps)?;
        broadcast_add(&mut z, &m);
        cache.csi_pooled = Some(pooled);
        cache.m_csi = Some(m);
    }
    if cfg.paths.icd {
        let icd = p.icd.as_ref().ok_or_else(|| Error::Config("ICD enabled without ICD parameters".into()))?;
        let mut m_icd: Option<Tensor<T>> = None;
        for stat in icd_stats(cfg.icd_stat) {
            let input = global_pool(&cache.x, stat, eps)?;
            let pre = dense(&input, &icd.fc1)?;
            let hidden = relu(&pre);
            let out = dense(&hidden, &icd.fc2)?;
            m_icd = Some(match m_icd {
                Some(acc) => acc.add(&out)?,
                None => out,
            });
            cache.icd.push(IcdBranch { stat, input, pre, hidden });
        }
        let m = m_icd.expect("at least one ICD branch");
        broadcast_add(&mut z, &m);
        cache.m_icd = Some(m);
    }
    if cfg.paths.csd {
        let csd = p.csd.as_ref().ok_or_else(|| Error::Config("CSD enabled without CSD parameters".into()))?;
        let m = depthwise_conv2d(&cache.x, csd)?;
        z.add_assign(&m)?;
        cache.m_csd = Some(m);
    }
    let gate = sigmoid(&z);
    let out = f_in.add(&gate.mul(&cache.x)?)?;
    cache.gate = Some(gate);
    Ok((out, cache))
}

/// Gradients of [`mamb_forward`] given `grad_out = ∂L/∂out`.
pub fn mamb_backward<T: Scalar>(
    cache: &BlockCache<T>,
    p: &BlockParams<T>,
    cfg: &NetworkConfig,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, BlockParams<T>)> {
    let eps = T::from_f64_lossy(cfg.eps);
    let mut gp = p.zeros_like();
    let mut g_in = grad_out.clone();

    let g_x = match &cache.gate {
        None => grad_out.clone(),
        Some(gate) => {
            let mut g_x = grad_out.mul(gate)?;
            let g_z = sigmoid_backward(gate, &grad_out.mul(&cache.x)?)?;
            if cfg.paths.csi {
                let g_m = spatial_sum(&g_z);
                g_x.add_assign(&global_pool_backward(&cache.x, cfg.csi_stat, eps, &g_m)?)?;
            }
            if cfg.paths.icd {
                let icd = p.icd.as_ref().expect("checked in forward");
                let gicd = gp.icd.as_mut().expect("mirrors params");
                let g_m = spatial_sum(&g_z);
                for b in &cache.icd {
                    let (g_hidden, g_fc2) = dense_backward(&b.hidden, &icd.fc2, &g_m)?;
                    let g_pre = relu_backward(&b.pre, &g_hidden)?;
                    let (g_input, g_fc1) = dense_backward(&b.input, &icd.fc1, &g_pre)?;
                    accumulate_dense(&mut gicd.fc1, &g_fc1);
                    accumulate_dense(&mut gicd.fc2, &g_fc2);
                    g_x.add_assign(&global_pool_backward(&cache.x, b.stat, eps, &g_input)?)?;
                }
            }
            if cfg.paths.csd {
                let csd = p.csd.as_ref().expect("checked in forward");
                let (g, g_csd) = depthwise_conv2d_backward(&cache.x, csd, &g_z)?;
                g_x.add_assign(&g)?;
                gp.csd = Some(g_csd);
            }
            g_x
        }
    };

    let (g_act1, g_conv2) = conv2d_backward(&cache.act1, &p.conv2, 1, &g_x)?;
    let g_pre1 = relu_backward(&cache.pre1, &g_act1)?;
    let (g_f, g_conv1) = conv2d_backward(&cache.input, &p.conv1, 1, &g_pre1)?;
    g_in.add_assign(&g_f)?;
    gp.conv1 = g_conv1;
    gp.conv2 = g_conv2;
    Ok((g_in, gp))
}

fn accumulate_dense<T: Scalar>(acc: &mut crate::ops::DenseParams<T>, g: &crate::ops::DenseParams<T>) {
    for (a, &b) in acc.weight.iter_mut().zip(&g.weight) {
        *a = *a + b;
    }
    for (a, &b) in acc.bias.iter_mut().zip(&g.bias) {
        *a = *a + b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::Paths;
    use crate::model::params::ModelParams;

    fn block(cfg: &NetworkConfig, seed: u64) -> BlockParams<f64> {
        ModelParams::<f64>::init(cfg, seed).blocks.remove(0)
    }

    fn input(c: usize, h: usize, w: usize) -> Tensor<f64> {
        Tensor::from_fn(Shape::new(1, c, h, w), |_, c, y, x| ((c * 7 + y * 3 + x) as f64 * 0.37).sin())
    }

    #[test]
    fn zero_convs_leave_input_unchanged() {
        for paths in ["none", "csi", "icd", "csd", "csi,icd,csd"] {
            let cfg = NetworkConfig::new(1, 16, 2, paths.parse().unwrap());
            let mut p = block(&cfg, 1);
            p.conv1 = crate::ops::ConvParams::zeros(16, 16, 3);
            p.conv2 = crate::ops::ConvParams::zeros(16, 16, 3);
            let x = input(16, 5, 4);
            let (out, _) = mamb_forward(&x, &p, &cfg).unwrap();
            assert_eq!(out, x, "paths {paths}");
        }
    }

    #[test]
    fn neutral_csd_gate_halves_residual() {
        let cfg = NetworkConfig::new(1, 16, 2, "csd".parse().unwrap());
        let mut p = block(&cfg, 2);
        p.csd = Some(crate::ops::DepthwiseParams::zeros(16));
        let x = input(16, 4, 4);
        let (out, cache) = mamb_forward(&x, &p, &cfg).unwrap();
        let expected = x.add(&cache.residual().scale(0.5)).unwrap();
        assert!(out.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn constant_residual_gives_neutral_csi_gate() {
        // Zero conv weights with a non-zero conv2 bias make X constant per channel.
        let cfg = NetworkConfig::new(1, 16, 2, "csi".parse().unwrap());
        let mut p = block(&cfg, 3);
        p.conv2.weight = Tensor::zeros(p.conv2.weight.shape());
        p.conv2.bias = (0..16).map(|c| c as f64 * 0.1 - 0.5).collect();
        let x = input(16, 3, 5);
        let (_, cache) = mamb_forward(&x, &p, &cfg).unwrap();
        let maps = cache.maps();
        assert!(maps.csi_pooled.unwrap().data().iter().all(|&v| v.abs() < 1e-15));
        // Rounding noise in the variances is swamped by eps in the standardization.
        assert!(maps.m_csi.unwrap().data().iter().all(|&v| v.abs() < 1e-12));
        assert!(maps.gate.unwrap().data().iter().all(|&v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn no_paths_is_plain_residual() {
        let cfg = NetworkConfig::new(1, 16, 2, Paths::NONE);
        let p = block(&cfg, 4);
        let x = input(16, 6, 6);
        let (out, cache) = mamb_forward(&x, &p, &cfg).unwrap();
        let manual = conv2d(&relu(&conv2d(&x, &p.conv1, 1).unwrap()), &p.conv2, 1).unwrap();
        assert_eq!(out, x.add(&manual).unwrap());
        assert!(cache.maps().gate.is_none());
    }

    #[test]
    fn icd_path_examples() {
        let mut p = IcdParams { fc1: crate::ops::DenseParams::zeros(2, 32), fc2: crate::ops::DenseParams::zeros(32, 2) };
        let zero = Tensor::<f64>::zeros(Shape::new(1, 32, 1, 1));
        p.fc1.weight.iter_mut().enumerate().for_each(|(i, w)| *w = i as f64 * 0.01);
        p.fc2.weight.iter_mut().enumerate().for_each(|(i, w)| *w = 1.0 - i as f64 * 0.01);
        assert!(icd_path(&zero, &p).unwrap().data().iter().all(|&v| v == 0.0));

        let mut q = IcdParams { fc1: crate::ops::DenseParams::zeros(2, 32), fc2: crate::ops::DenseParams::zeros(32, 2) };
        q.fc2.bias = (0..32).map(|i| i as f64).collect();
        let v = Tensor::from_fn(Shape::new(1, 32, 1, 1), |_, c, _, _| c as f64);
        assert_eq!(icd_path(&v, &q).unwrap().data(), q.fc2.bias.as_slice());
        assert_eq!(p.fc1.num_params() + p.fc2.num_params(), 162);
    }

    #[test]
    fn channel_mismatch() {
        let cfg = NetworkConfig::new(1, 16, 2, Paths::ALL);
        let p = block(&cfg, 5);
        assert!(matches!(mamb_forward(&input(8, 4, 4), &p, &cfg), Err(Error::Shape(_))));
    }
}
