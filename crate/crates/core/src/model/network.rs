//! Full network: head conv, block stack, global skip, sub-pixel upscaling,
//! reconstruction conv.

use crate::error::{Error, Result};
use crate::model::config::NetworkConfig;
use crate::model::mamb::{mamb_backward, mamb_forward, BlockCache, ModulationMaps};
use crate::model::params::ModelParams;
use crate::ops::{conv2d, conv2d_backward, pixel_shuffle, space_to_depth};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct ForwardCache<T> {
    input: Tensor<T>,
    blocks: Vec<BlockCache<T>>,
    block_out: Tensor<T>,
    up_inputs: Vec<Tensor<T>>,
    recon_input: Tensor<T>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn block_maps(&self, r: usize) -> Option<ModulationMaps<T>> {
        self.blocks.get(r).map(BlockCache::maps)
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Sign pattern of every ReLU input in the network.
    pub fn relu_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for b in &self.blocks {
            b.relu_pattern(&mut out);
        }
        out
    }
}

/// Maps a mean-subtracted `(N, 3, H, W)` image to `(N, 3, s·H, s·W)`.
pub fn network_forward<T: Scalar>(x: &Tensor<T>, p: &ModelParams<T>, cfg: &NetworkConfig) -> Result<Tensor<T>> {
    network_forward_cached(x, p, cfg).map(|(y, _)| y)
}

pub fn network_forward_cached<T: Scalar>(
    x: &Tensor<T>,
    p: &ModelParams<T>,
    cfg: &NetworkConfig,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    if x.shape().c != 3 {
        return Err(Error::Shape(format!("network input must have 3 channels, got {}", x.shape().c)));
    }
    if p.blocks.len() != cfg.blocks {
        return Err(Error::Config(format!(
            "parameters hold {} blocks, configuration expects {}",
            p.blocks.len(),
            cfg.blocks
        )));
    }
    let f0 = conv2d(x, &p.head, 1)?;
    let mut f = f0.clone();
    let mut blocks = Vec::with_capacity(cfg.blocks);
    for bp in &p.blocks {
        let (next, cache) = mamb_forward(&f, bp, cfg)?;
        blocks.push(cache);
        f = next;
    }
    let mut feat = conv2d(&f, &p.feat, 1)?;
    feat.add_assign(&f0)?;

    let mut up_inputs = Vec::with_capacity(p.up.len());
    let mut h = feat;
    for (conv, (_, r)) in p.up.iter().zip(cfg.upscale_stages()) {
        let y = pixel_shuffle(&conv2d(&h, conv, 1)?, r)?;
        up_inputs.push(h);
        h = y;
    }
    let out = conv2d(&h, &p.recon, 1)?;
    let cache = ForwardCache { input: x.clone(), blocks, block_out: f, up_inputs, recon_input: h };
    Ok((out, cache))
}

/// Parameter gradients and the gradient with respect to the input image.
pub fn network_backward<T: Scalar>(
    p: &ModelParams<T>,
    cfg: &NetworkConfig,
    cache: &ForwardCache<T>,
    grad_out: &Tensor<T>,
) -> Result<(ModelParams<T>, Tensor<T>)> {
    let mut grads = p.zeros_like();
    let (mut g, g_recon) = conv2d_backward(&cache.recon_input, &p.recon, 1, grad_out)?;
    grads.recon = g_recon;
    let stages = cfg.upscale_stages();
    for i in (0..p.up.len()).rev() {
        let g_conv = space_to_depth(&g, stages[i].1)?;
        let (g_in, g_up) = conv2d_backward(&cache.up_inputs[i], &p.up[i], 1, &g_conv)?;
        grads.up[i] = g_up;
        g = g_in;
    }
    // g is now ∂L/∂F_feat; F_feat = F_0 + feat(F_R).
    let g_feat = g;
    let (mut g_f, g_feat_conv) = conv2d_backward(&cache.block_out, &p.feat, 1, &g_feat)?;
    grads.feat = g_feat_conv;
    for r in (0..p.blocks.len()).rev() {
        let (g_prev, g_block) = mamb_backward(&cache.blocks[r], &p.blocks[r], cfg, &g_f)?;
        grads.blocks[r] = g_block;
        g_f = g_prev;
    }
    g_f.add_assign(&g_feat)?;
    let (g_x, g_head) = conv2d_backward(&cache.input, &p.head, 1, &g_f)?;
    grads.head = g_head;
    Ok((grads, g_x))
}
