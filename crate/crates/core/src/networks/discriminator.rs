//! Patch discriminator over (condition, candidate) image pairs.
//!
//! `n_layers` stride-2 conv blocks shrink the concatenated 6-channel
//! input, then a stride-1 block and a stride-1 projection produce a grid
//! of per-patch logits. Kernel 4, padding 1 throughout, so each stride-2
//! stage maps n -> floor((n-2)/2)+1 and each stride-1 stage maps
//! n -> n-1.

use serde::{Deserialize, Serialize};

use crate::corruption::derive_seed;

use super::layers::{
    conv_out_size, leaky_relu, leaky_relu_backward, Conv2d, InstanceNorm, NormCache,
    ParamGradPairs, Spatial,
};
use super::params::ParamSet;
use super::NetworkError;

const K: usize = 4;
const P: usize = 1;
const CHANNEL_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub base_channels: usize,
    pub n_layers: usize,
}

impl DiscriminatorConfig {
    pub fn new(base_channels: usize, n_layers: usize) -> Self {
        Self {
            base_channels,
            n_layers,
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.base_channels < 4 {
            return Err(NetworkError::ConfigInvalid(format!(
                "base_channels {} below minimum 4",
                self.base_channels
            )));
        }
        if !(1..=4).contains(&self.n_layers) {
            return Err(NetworkError::ConfigInvalid(format!(
                "n_layers {} outside [1, 4]",
                self.n_layers
            )));
        }
        Ok(())
    }

    /// Patch-grid dimensions for an input of the given size: `n_layers`
    /// stride-2 stages followed by two stride-1 stages.
    pub fn output_grid_dims(&self, input_dims: (u32, u32)) -> Result<(u32, u32), NetworkError> {
        let (mut w, mut h) = (input_dims.0 as usize, input_dims.1 as usize);
        for _ in 0..self.n_layers {
            if w < K || h < K {
                return Err(NetworkError::ConfigInvalid(format!(
                    "input {}x{} collapses below the kernel in the stride-2 stack",
                    input_dims.0, input_dims.1
                )));
            }
            w = conv_out_size(w, K, 2, P);
            h = conv_out_size(h, K, 2, P);
        }
        for _ in 0..2 {
            if w < 2 || h < 2 {
                return Err(NetworkError::ConfigInvalid(format!(
                    "input {}x{} collapses in the stride-1 stages",
                    input_dims.0, input_dims.1
                )));
            }
            w = conv_out_size(w, K, 1, P);
            h = conv_out_size(h, K, 1, P);
        }
        Ok((w as u32, h as u32))
    }

    fn channels(&self) -> Vec<usize> {
        let cap = CHANNEL_CAP * self.base_channels;
        (0..=self.n_layers)
            .map(|i| (self.base_channels << i).min(cap))
            .collect()
    }
}

struct DiscBlock {
    conv: Conv2d,
    norm: Option<InstanceNorm>,
    /// Stride-1 projection to logits has no activation.
    activated: bool,
}

/// Typed discriminator with weights and gradient buffers.
pub struct Discriminator {
    pub cfg: DiscriminatorConfig,
    blocks: Vec<DiscBlock>,
}

/// Forward cache for the backward pass.
pub struct DiscCache {
    inputs: Vec<Vec<f64>>,
    spatials: Vec<Spatial>,
    norms: Vec<Option<NormCache>>,
    pre_acts: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub grid: Spatial,
}

impl Discriminator {
    pub fn init(cfg: DiscriminatorConfig, seed: u64) -> Result<Self, NetworkError> {
        cfg.validate()?;
        let ch = cfg.channels();
        let mut blocks = Vec::new();
        // Stride-2 stack.
        for i in 0..cfg.n_layers {
            let ci = if i == 0 { 6 } else { ch[i - 1] };
            blocks.push(DiscBlock {
                conv: Conv2d::init(ci, ch[i], K, 2, P, derive_seed(seed, 200 + i as u64)),
                norm: (i >= 1).then(|| InstanceNorm::new(ch[i])),
                activated: true,
            });
        }
        // Stride-1 widening block.
        blocks.push(DiscBlock {
            conv: Conv2d::init(
                ch[cfg.n_layers - 1],
                ch[cfg.n_layers],
                K,
                1,
                P,
                derive_seed(seed, 300),
            ),
            norm: Some(InstanceNorm::new(ch[cfg.n_layers])),
            activated: true,
        });
        // Stride-1 projection to one logit channel.
        blocks.push(DiscBlock {
            conv: Conv2d::init(ch[cfg.n_layers], 1, K, 1, P, derive_seed(seed, 301)),
            norm: None,
            activated: false,
        });
        Ok(Self { cfg, blocks })
    }

    pub fn zero_grad(&mut self) {
        for b in &mut self.blocks {
            b.conv.zero_grad();
            if let Some(n) = &mut b.norm {
                n.zero_grad();
            }
        }
    }

    /// Forward over the concatenated (condition ++ candidate) planes.
    pub fn forward(&self, condition: &[f64], candidate: &[f64], input: Spatial) -> DiscCache {
        let mut x = Vec::with_capacity(condition.len() + candidate.len());
        x.extend_from_slice(condition);
        x.extend_from_slice(candidate);

        let mut inputs = Vec::new();
        let mut spatials = Vec::new();
        let mut norms = Vec::new();
        let mut pre_acts = Vec::new();
        let mut sp = input;
        let mut cur = x;
        for blk in &self.blocks {
            let so = blk.conv.out_spatial(sp);
            let z = blk.conv.forward(&cur, sp);
            let (zn, nc) = match &blk.norm {
                Some(n) => {
                    let (y, c) = n.forward(&z, so);
                    (y, Some(c))
                }
                None => (z, None),
            };
            let out = if blk.activated { leaky_relu(&zn) } else { zn.clone() };
            inputs.push(cur);
            spatials.push(sp);
            norms.push(nc);
            pre_acts.push(zn);
            cur = out;
            sp = so;
        }
        DiscCache {
            inputs,
            spatials,
            norms,
            pre_acts,
            logits: cur,
            grid: sp,
        }
    }

    /// Backward from the logit-grid gradient. Parameter gradients
    /// accumulate only when `accumulate_params`; the gradient with
    /// respect to the concatenated input is returned when `need_dinput`.
    pub fn backward(
        &mut self,
        cache: &DiscCache,
        d_logits: &[f64],
        accumulate_params: bool,
        need_dinput: bool,
    ) -> Option<Vec<f64>> {
        let mut d = d_logits.to_vec();
        for (idx, blk) in self.blocks.iter_mut().enumerate().rev() {
            let sp = cache.spatials[idx];
            if blk.activated {
                d = leaky_relu_backward(&cache.pre_acts[idx], &d);
            }
            if let (Some(n), Some(nc)) = (&mut blk.norm, &cache.norms[idx]) {
                let so = blk.conv.out_spatial(sp);
                d = n.backward(nc, &d, so);
                if !accumulate_params {
                    n.zero_grad();
                }
            }
            let need_dx = idx > 0 || need_dinput;
            let dx = if accumulate_params {
                blk.conv.backward(&cache.inputs[idx], sp, &d, need_dx)
            } else {
                // Only the input gradient is wanted; stash and restore
                // the parameter buffers around the shared kernel.
                let saved_w = blk.conv.gw.clone();
                let saved_b = blk.conv.gb.clone();
                let dx = blk.conv.backward(&cache.inputs[idx], sp, &d, need_dx);
                blk.conv.gw = saved_w;
                blk.conv.gb = saved_b;
                dx
            };
            d = dx?;
        }
        Some(d)
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            names.push(format!("block{i}.conv.w"));
            names.push(format!("block{i}.conv.b"));
            if b.norm.is_some() {
                names.push(format!("block{i}.norm.gamma"));
                names.push(format!("block{i}.norm.beta"));
            }
        }
        names
    }

    pub fn param_grad_pairs(&mut self) -> ParamGradPairs<'_> {
        let mut pairs: ParamGradPairs<'_> = Vec::new();
        for b in &mut self.blocks {
            let Conv2d { w, b: bias, gw, gb, .. } = &mut b.conv;
            pairs.push((w, gw));
            pairs.push((bias, gb));
            if let Some(InstanceNorm {
                gamma,
                beta,
                g_gamma,
                g_beta,
                ..
            }) = b.norm.as_mut()
            {
                pairs.push((gamma, g_gamma));
                pairs.push((beta, g_beta));
            }
        }
        pairs
    }

    pub fn to_params(&self) -> ParamSet {
        let mut set = ParamSet::default();
        for (i, b) in self.blocks.iter().enumerate() {
            let c = &b.conv;
            set.push(
                format!("block{i}.conv.w"),
                vec![c.co, c.ci, c.k, c.k],
                c.w.clone(),
            );
            set.push(format!("block{i}.conv.b"), vec![c.co], c.b.clone());
            if let Some(n) = &b.norm {
                set.push(format!("block{i}.norm.gamma"), vec![n.c], n.gamma.clone());
                set.push(format!("block{i}.norm.beta"), vec![n.c], n.beta.clone());
            }
        }
        set
    }

    pub fn from_params(cfg: DiscriminatorConfig, set: &ParamSet) -> Result<Self, NetworkError> {
        let mut net = Self::init(cfg, 0)?;
        for (i, b) in net.blocks.iter_mut().enumerate() {
            let c = &mut b.conv;
            c.w = set.take(&format!("block{i}.conv.w"), &[c.co, c.ci, c.k, c.k])?;
            c.b = set.take(&format!("block{i}.conv.b"), &[c.co])?;
            if let Some(n) = &mut b.norm {
                n.gamma = set.take(&format!("block{i}.norm.gamma"), &[n.c])?;
                n.beta = set.take(&format!("block{i}.norm.beta"), &[n.c])?;
            }
        }
        Ok(net)
    }
}
