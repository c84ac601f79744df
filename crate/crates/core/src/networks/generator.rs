//! Encoder–decoder generator with skip connections.
//!
//! `depth` stride-2 conv-norm-LeakyReLU blocks halve the resolution and
//! grow channels (doubling, capped at 8x base); `depth` mirrored
//! transposed-conv blocks restore it, each consuming the matching
//! encoder output through channel concatenation. The output head maps
//! through tanh onto [-1, 1] and affinely onto [0, 1].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corruption::derive_seed;
use crate::raster::MIN_DIM;

use super::layers::{
    leaky_relu, leaky_relu_backward, relu, relu_backward, tanh_unit, tanh_unit_backward, Conv2d,
    ConvTranspose2d, InstanceNorm, NormCache, ParamGradPairs, Spatial,
};
use super::params::ParamSet;
use super::NetworkError;

/// Kernel size / stride / padding used by every block.
const K: usize = 4;
const S: usize = 2;
const P: usize = 1;

/// Channel growth cap, as a multiple of `base_channels`.
const CHANNEL_CAP: usize = 8;

/// Decoder blocks (innermost first, output block excluded) that apply
/// dropout during training.
const DROPOUT_BLOCKS: usize = 3;

/// Dropout keep probability (inverted scaling at train time).
const DROPOUT_KEEP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub base_channels: usize,
    pub depth: usize,
    pub input_dims: (u32, u32),
    /// Off switch for decoder dropout (active in training mode only).
    #[serde(default = "default_dropout")]
    pub dropout: bool,
}

fn default_dropout() -> bool {
    true
}

impl GeneratorConfig {
    pub fn new(base_channels: usize, depth: usize, input_dims: (u32, u32)) -> Self {
        Self {
            base_channels,
            depth,
            input_dims,
            dropout: true,
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.base_channels < 4 {
            return Err(NetworkError::ConfigInvalid(format!(
                "base_channels {} below minimum 4",
                self.base_channels
            )));
        }
        if !(2..=8).contains(&self.depth) {
            return Err(NetworkError::ConfigInvalid(format!(
                "depth {} outside [2, 8]",
                self.depth
            )));
        }
        let div = 1u32 << self.depth;
        let (w, h) = self.input_dims;
        if w % div != 0 || h % div != 0 {
            return Err(NetworkError::ConfigInvalid(format!(
                "input dims {w}x{h} not divisible by 2^depth = {div}"
            )));
        }
        if w < MIN_DIM || h < MIN_DIM {
            return Err(NetworkError::ConfigInvalid(format!(
                "input dims {w}x{h} below minimum {MIN_DIM}"
            )));
        }
        Ok(())
    }

    /// Encoder output channels per stage.
    pub fn enc_channels(&self) -> Vec<usize> {
        (0..self.depth)
            .map(|i| (self.base_channels << i).min(CHANNEL_CAP * self.base_channels))
            .collect()
    }

    fn spatial_after(&self, stage: usize) -> Spatial {
        let (w, h) = self.input_dims;
        Spatial::new((h as usize) >> stage, (w as usize) >> stage)
    }

    fn n_dropout(&self) -> usize {
        if self.dropout {
            DROPOUT_BLOCKS.min(self.depth - 1)
        } else {
            0
        }
    }
}

struct DownBlock {
    conv: Conv2d,
    norm: Option<InstanceNorm>,
}

struct UpBlock {
    tconv: ConvTranspose2d,
    norm: Option<InstanceNorm>,
    dropout: bool,
}

/// Typed generator holding its weights and gradient buffers.
pub struct Generator {
    pub cfg: GeneratorConfig,
    downs: Vec<DownBlock>,
    ups: Vec<UpBlock>,
}

/// Everything the backward pass needs from one training forward.
pub struct GenCache {
    enc_in: Vec<Vec<f64>>,
    enc_norm: Vec<Option<NormCache>>,
    enc_zn: Vec<Vec<f64>>,
    dec_in: Vec<Vec<f64>>,
    dec_norm: Vec<Option<NormCache>>,
    dec_zn: Vec<Vec<f64>>,
    dec_mask: Vec<Option<Vec<f64>>>,
    pub output: Vec<f64>,
}

impl Generator {
    /// Fresh network with Gaussian(0, 0.02) kernels, unit norm scales.
    pub fn init(cfg: GeneratorConfig, seed: u64) -> Result<Self, NetworkError> {
        cfg.validate()?;
        let ch = cfg.enc_channels();
        let d = cfg.depth;
        let n_dropout = cfg.n_dropout();
        let mut downs = Vec::with_capacity(d);
        for i in 0..d {
            let ci = if i == 0 { 3 } else { ch[i - 1] };
            downs.push(DownBlock {
                conv: Conv2d::init(ci, ch[i], K, S, P, derive_seed(seed, i as u64)),
                norm: (i >= 1).then(|| InstanceNorm::new(ch[i])),
            });
        }
        let mut ups = Vec::with_capacity(d);
        for j in 0..d {
            let (ci, co) = if j == 0 {
                (ch[d - 1], ch[d - 2])
            } else if j < d - 1 {
                (2 * ch[d - 1 - j], ch[d - 2 - j])
            } else {
                (2 * ch[0], 3)
            };
            let is_output = j == d - 1;
            ups.push(UpBlock {
                tconv: ConvTranspose2d::init(ci, co, K, S, P, derive_seed(seed, 100 + j as u64)),
                norm: (!is_output).then(|| InstanceNorm::new(co)),
                dropout: !is_output && j < n_dropout,
            });
        }
        Ok(Self { cfg, downs, ups })
    }

    pub fn zero_grad(&mut self) {
        for b in &mut self.downs {
            b.conv.zero_grad();
            if let Some(n) = &mut b.norm {
                n.zero_grad();
            }
        }
        for b in &mut self.ups {
            b.tconv.zero_grad();
            if let Some(n) = &mut b.norm {
                n.zero_grad();
            }
        }
    }

    /// Training forward. Dropout masks are drawn from `rng` when the
    /// config enables them; pass `None` for a dropout-free pass that
    /// still produces a cache (used by gradient checks).
    pub fn forward_train(&self, input: &[f64], mut rng: Option<&mut ChaCha8Rng>) -> GenCache {
        let d = self.cfg.depth;
        let mut enc_in = Vec::with_capacity(d);
        let mut enc_norm = Vec::with_capacity(d);
        let mut enc_zn = Vec::with_capacity(d);
        let mut enc_out: Vec<Vec<f64>> = Vec::with_capacity(d);

        let mut cur = input.to_vec();
        for (i, blk) in self.downs.iter().enumerate() {
            let si = self.cfg.spatial_after(i);
            let so = self.cfg.spatial_after(i + 1);
            let z = blk.conv.forward(&cur, si);
            let (zn, nc) = match &blk.norm {
                Some(n) => {
                    let (y, c) = n.forward(&z, so);
                    (y, Some(c))
                }
                None => (z, None),
            };
            let out = leaky_relu(&zn);
            enc_in.push(cur);
            enc_norm.push(nc);
            enc_zn.push(zn);
            enc_out.push(out.clone());
            cur = out;
        }

        let mut dec_in = Vec::with_capacity(d);
        let mut dec_norm = Vec::with_capacity(d);
        let mut dec_zn = Vec::with_capacity(d);
        let mut dec_mask = Vec::with_capacity(d);
        let mut output = Vec::new();

        for (j, blk) in self.ups.iter().enumerate() {
            let x = if j == 0 {
                enc_out[d - 1].clone()
            } else {
                let mut v = cur.clone();
                v.extend_from_slice(&enc_out[d - 1 - j]);
                v
            };
            let si = self.cfg.spatial_after(d - j);
            let z = blk.tconv.forward(&x, si);
            let so = self.cfg.spatial_after(d - 1 - j);
            if j == d - 1 {
                let y = tanh_unit(&z);
                dec_in.push(x);
                dec_norm.push(None);
                dec_zn.push(z);
                dec_mask.push(None);
                output = y;
            } else {
                let (zn, nc) = match &blk.norm {
                    Some(n) => {
                        let (y, c) = n.forward(&z, so);
                        (y, Some(c))
                    }
                    None => (z, None),
                };
                let mut a = relu(&zn);
                let mask = if blk.dropout {
                    match rng.as_deref_mut() {
                        Some(r) => {
                            let m: Vec<f64> = (0..a.len())
                                .map(|_| {
                                    if r.gen_range(0.0..1.0) < DROPOUT_KEEP {
                                        1.0 / DROPOUT_KEEP
                                    } else {
                                        0.0
                                    }
                                })
                                .collect();
                            for (av, mv) in a.iter_mut().zip(&m) {
                                *av *= mv;
                            }
                            Some(m)
                        }
                        None => None,
                    }
                } else {
                    None
                };
                dec_in.push(x);
                dec_norm.push(nc);
                dec_zn.push(zn);
                dec_mask.push(mask);
                cur = a;
            }
        }

        GenCache {
            enc_in,
            enc_norm,
            enc_zn,
            dec_in,
            dec_norm,
            dec_zn,
            dec_mask,
            output,
        }
    }

    /// Inference forward: no dropout, no cache retention.
    pub fn forward_infer(&self, input: &[f64]) -> Vec<f64> {
        self.forward_train(input, None).output
    }

    /// Accumulate parameter gradients for `d_output` (gradient of a
    /// scalar loss with respect to the [0,1] output image).
    pub fn backward(&mut self, cache: &GenCache, d_output: &[f64]) {
        let d = self.cfg.depth;
        let ch = self.cfg.enc_channels();

        // Skip gradients flowing into each encoder output.
        let mut d_enc: Vec<Option<Vec<f64>>> = vec![None; d];
        let mut dcur: Vec<f64> = Vec::new();

        for j in (0..d).rev() {
            let si = self.cfg.spatial_after(d - j);
            let so = self.cfg.spatial_after(d - 1 - j);
            let blk = &mut self.ups[j];
            let dz = if j == d - 1 {
                tanh_unit_backward(&cache.output, d_output)
            } else {
                let mut dv = dcur.clone();
                if let Some(mask) = &cache.dec_mask[j] {
                    for (g, m) in dv.iter_mut().zip(mask) {
                        *g *= m;
                    }
                }
                let dzn = relu_backward(&cache.dec_zn[j], &dv);
                match (&mut blk.norm, &cache.dec_norm[j]) {
                    (Some(n), Some(nc)) => n.backward(nc, &dzn, so),
                    _ => dzn,
                }
            };
            let dx = blk
                .tconv
                .backward(&cache.dec_in[j], si, &dz, true)
                .expect("input gradient requested");
            if j == 0 {
                add_into(&mut d_enc[d - 1], &dx);
            } else {
                let prev_c = if j == d - 1 { ch[0] } else { ch[d - 1 - j] };
                let split = prev_c * si.len();
                dcur = dx[..split].to_vec();
                add_into(&mut d_enc[d - 1 - j], &dx[split..]);
            }
        }

        let mut dgrad = d_enc[d - 1].take().expect("bottleneck gradient set");
        for i in (0..d).rev() {
            let si = self.cfg.spatial_after(i);
            let so = self.cfg.spatial_after(i + 1);
            let blk = &mut self.downs[i];
            let dzn = leaky_relu_backward(&cache.enc_zn[i], &dgrad);
            let dz = match (&mut blk.norm, &cache.enc_norm[i]) {
                (Some(n), Some(nc)) => n.backward(nc, &dzn, so),
                _ => dzn,
            };
            let need_dx = i > 0;
            let dx = blk.conv.backward(&cache.enc_in[i], si, &dz, need_dx);
            if i > 0 {
                let mut dnext = dx.expect("input gradient requested");
                if let Some(skip) = d_enc[i - 1].take() {
                    for (a, b) in dnext.iter_mut().zip(&skip) {
                        *a += b;
                    }
                }
                dgrad = dnext;
            }
        }
    }

    /// Canonical parameter names, matching [`Generator::to_params`] order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (i, b) in self.downs.iter().enumerate() {
            names.push(format!("down{i}.conv.w"));
            names.push(format!("down{i}.conv.b"));
            if b.norm.is_some() {
                names.push(format!("down{i}.norm.gamma"));
                names.push(format!("down{i}.norm.beta"));
            }
        }
        for (j, b) in self.ups.iter().enumerate() {
            names.push(format!("up{j}.tconv.w"));
            names.push(format!("up{j}.tconv.b"));
            if b.norm.is_some() {
                names.push(format!("up{j}.norm.gamma"));
                names.push(format!("up{j}.norm.beta"));
            }
        }
        names
    }

    /// Parameter/gradient pairs in canonical order, for the optimizer.
    pub fn param_grad_pairs(&mut self) -> ParamGradPairs<'_> {
        let mut pairs: ParamGradPairs<'_> = Vec::new();
        for b in &mut self.downs {
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
        for b in &mut self.ups {
            let ConvTranspose2d { w, b: bias, gw, gb, .. } = &mut b.tconv;
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

    /// Flat named-array snapshot of the weights.
    pub fn to_params(&self) -> ParamSet {
        let mut set = ParamSet::default();
        for (i, b) in self.downs.iter().enumerate() {
            let c = &b.conv;
            set.push(
                format!("down{i}.conv.w"),
                vec![c.co, c.ci, c.k, c.k],
                c.w.clone(),
            );
            set.push(format!("down{i}.conv.b"), vec![c.co], c.b.clone());
            if let Some(n) = &b.norm {
                set.push(format!("down{i}.norm.gamma"), vec![n.c], n.gamma.clone());
                set.push(format!("down{i}.norm.beta"), vec![n.c], n.beta.clone());
            }
        }
        for (j, b) in self.ups.iter().enumerate() {
            let c = &b.tconv;
            set.push(
                format!("up{j}.tconv.w"),
                vec![c.ci, c.co, c.k, c.k],
                c.w.clone(),
            );
            set.push(format!("up{j}.tconv.b"), vec![c.co], c.b.clone());
            if let Some(n) = &b.norm {
                set.push(format!("up{j}.norm.gamma"), vec![n.c], n.gamma.clone());
                set.push(format!("up{j}.norm.beta"), vec![n.c], n.beta.clone());
            }
        }
        set
    }

    /// Rebuild a generator from a config and a parameter snapshot.
    pub fn from_params(cfg: GeneratorConfig, set: &ParamSet) -> Result<Self, NetworkError> {
        let mut net = Self::init(cfg, 0)?;
        for (i, b) in net.downs.iter_mut().enumerate() {
            let c = &mut b.conv;
            c.w = set.take(&format!("down{i}.conv.w"), &[c.co, c.ci, c.k, c.k])?;
            c.b = set.take(&format!("down{i}.conv.b"), &[c.co])?;
            if let Some(n) = &mut b.norm {
                n.gamma = set.take(&format!("down{i}.norm.gamma"), &[n.c])?;
                n.beta = set.take(&format!("down{i}.norm.beta"), &[n.c])?;
            }
        }
        for (j, b) in net.ups.iter_mut().enumerate() {
            let c = &mut b.tconv;
            c.w = set.take(&format!("up{j}.tconv.w"), &[c.ci, c.co, c.k, c.k])?;
            c.b = set.take(&format!("up{j}.tconv.b"), &[c.co])?;
            if let Some(n) = &mut b.norm {
                n.gamma = set.take(&format!("up{j}.norm.gamma"), &[n.c])?;
                n.beta = set.take(&format!("up{j}.norm.beta"), &[n.c])?;
            }
        }
        Ok(net)
    }
}

fn add_into(slot: &mut Option<Vec<f64>>, v: &[f64]) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b;
            }
        }
        None => *slot = Some(v.to_vec()),
    }
}
