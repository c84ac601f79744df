//! Layer primitives with explicit forward/backward passes.
//!
//! Activations are flat `Vec<f64>` in planar (channel, row, col) order.
//! All kernels parallelize only over disjoint output slices, so results
//! are bit-identical regardless of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

/// Epsilon in the normalization variance denominator.
pub const NORM_EPS: f64 = 1e-5;

/// Negative slope of the encoder activation.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Weight init: zero-mean Gaussian with this standard deviation.
pub const INIT_STD: f64 = 0.02;

/// Spatial size of one activation map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Spatial {
    pub h: usize,
    pub w: usize,
}

impl Spatial {
    pub fn new(h: usize, w: usize) -> Self {
        Self { h, w }
    }

    pub fn len(&self) -> usize {
        self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Mutable parameter buffers zipped with their gradient buffers, in a
/// network's canonical order.
pub type ParamGradPairs<'a> = Vec<(&'a mut Vec<f64>, &'a Vec<f64>)>;

pub fn conv_out_size(n: usize, k: usize, s: usize, p: usize) -> usize {
    (n + 2 * p - k) / s + 1
}

pub fn tconv_out_size(n: usize, k: usize, s: usize, p: usize) -> usize {
    (n - 1) * s + k - 2 * p
}

fn draw_gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let dist = Normal::new(0.0, INIT_STD).expect("valid normal");
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Strided convolution, kernel layout `[co][ci][k][k]`.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub ci: usize,
    pub co: usize,
    pub k: usize,
    pub s: usize,
    pub p: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub gw: Vec<f64>,
    pub gb: Vec<f64>,
}

impl Conv2d {
    pub fn init(ci: usize, co: usize, k: usize, s: usize, p: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = draw_gaussian(&mut rng, co * ci * k * k);
        Self {
            ci,
            co,
            k,
            s,
            p,
            w,
            b: vec![0.0; co],
            gw: vec![0.0; co * ci * k * k],
            gb: vec![0.0; co],
        }
    }

    pub fn out_spatial(&self, si: Spatial) -> Spatial {
        Spatial::new(
            conv_out_size(si.h, self.k, self.s, self.p),
            conv_out_size(si.w, self.k, self.s, self.p),
        )
    }

    pub fn zero_grad(&mut self) {
        self.gw.iter_mut().for_each(|g| *g = 0.0);
        self.gb.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn forward(&self, x: &[f64], si: Spatial) -> Vec<f64> {
        let so = self.out_spatial(si);
        let (ci, k, s, p) = (self.ci, self.k, self.s, self.p);
        debug_assert_eq!(x.len(), ci * si.len());
        let mut y = vec![0.0; self.co * so.len()];
        y.par_chunks_mut(so.len()).enumerate().for_each(|(oc, plane)| {
            for oy in 0..so.h {
                for ox in 0..so.w {
                    let mut acc = self.b[oc];
                    for ic in 0..ci {
                        for ky in 0..k {
                            let iy = (oy * s + ky) as isize - p as isize;
                            if iy < 0 || iy >= si.h as isize {
                                continue;
                            }
                            let xrow = (ic * si.h + iy as usize) * si.w;
                            let wrow = ((oc * ci + ic) * k + ky) * k;
                            for kx in 0..k {
                                let ix = (ox * s + kx) as isize - p as isize;
                                if ix < 0 || ix >= si.w as isize {
                                    continue;
                                }
                                acc += self.w[wrow + kx] * x[xrow + ix as usize];
                            }
                        }
                    }
                    plane[oy * so.w + ox] = acc;
                }
            }
        });
        y
    }

    /// Accumulate parameter gradients and return the input gradient
    /// (skipped when `need_dx` is false).
    pub fn backward(
        &mut self,
        x: &[f64],
        si: Spatial,
        dy: &[f64],
        need_dx: bool,
    ) -> Option<Vec<f64>> {
        let so = self.out_spatial(si);
        let (ci, co, k, s, p) = (self.ci, self.co, self.k, self.s, self.p);
        debug_assert_eq!(dy.len(), co * so.len());

        self.gw
            .par_chunks_mut(ci * k * k)
            .enumerate()
            .for_each(|(oc, gslice)| {
                for ic in 0..ci {
                    for ky in 0..k {
                        for kx in 0..k {
                            let mut acc = 0.0;
                            for oy in 0..so.h {
                                let iy = (oy * s + ky) as isize - p as isize;
                                if iy < 0 || iy >= si.h as isize {
                                    continue;
                                }
                                let xrow = (ic * si.h + iy as usize) * si.w;
                                let drow = (oc * so.h + oy) * so.w;
                                for ox in 0..so.w {
                                    let ix = (ox * s + kx) as isize - p as isize;
                                    if ix < 0 || ix >= si.w as isize {
                                        continue;
                                    }
                                    acc += x[xrow + ix as usize] * dy[drow + ox];
                                }
                            }
                            gslice[(ic * k + ky) * k + kx] += acc;
                        }
                    }
                }
            });
        self.gb.par_iter_mut().enumerate().for_each(|(oc, gb)| {
            *gb += dy[oc * so.len()..(oc + 1) * so.len()].iter().sum::<f64>();
        });

        if !need_dx {
            return None;
        }
        let mut dx = vec![0.0; ci * si.len()];
        dx.par_chunks_mut(si.len()).enumerate().for_each(|(ic, plane)| {
            for oc in 0..co {
                let drow0 = oc * so.len();
                for oy in 0..so.h {
                    for ox in 0..so.w {
                        let g = dy[drow0 + oy * so.w + ox];
                        if g == 0.0 {
                            continue;
                        }
                        for ky in 0..k {
                            let iy = (oy * s + ky) as isize - p as isize;
                            if iy < 0 || iy >= si.h as isize {
                                continue;
                            }
                            let wrow = ((oc * ci + ic) * k + ky) * k;
                            let prow = iy as usize * si.w;
                            for kx in 0..k {
                                let ix = (ox * s + kx) as isize - p as isize;
                                if ix < 0 || ix >= si.w as isize {
                                    continue;
                                }
                                plane[prow + ix as usize] += self.w[wrow + kx] * g;
                            }
                        }
                    }
                }
            }
        });
        Some(dx)
    }
}

/// Strided transposed convolution, kernel layout `[ci][co][k][k]`.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub ci: usize,
    pub co: usize,
    pub k: usize,
    pub s: usize,
    pub p: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub gw: Vec<f64>,
    pub gb: Vec<f64>,
}

impl ConvTranspose2d {
    pub fn init(ci: usize, co: usize, k: usize, s: usize, p: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = draw_gaussian(&mut rng, ci * co * k * k);
        Self {
            ci,
            co,
            k,
            s,
            p,
            w,
            b: vec![0.0; co],
            gw: vec![0.0; ci * co * k * k],
            gb: vec![0.0; co],
        }
    }

    pub fn out_spatial(&self, si: Spatial) -> Spatial {
        Spatial::new(
            tconv_out_size(si.h, self.k, self.s, self.p),
            tconv_out_size(si.w, self.k, self.s, self.p),
        )
    }

    pub fn zero_grad(&mut self) {
        self.gw.iter_mut().for_each(|g| *g = 0.0);
        self.gb.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn forward(&self, x: &[f64], si: Spatial) -> Vec<f64> {
        let so = self.out_spatial(si);
        let (ci, k, s, p) = (self.ci, self.k, self.s, self.p);
        debug_assert_eq!(x.len(), ci * si.len());
        let mut y = vec![0.0; self.co * so.len()];
        y.par_chunks_mut(so.len()).enumerate().for_each(|(oc, plane)| {
            for oy in 0..so.h {
                for ox in 0..so.w {
                    let mut acc = self.b[oc];
                    for ky in 0..k {
                        let ty = oy + p;
                        if ty < ky || (ty - ky) % s != 0 {
                            continue;
                        }
                        let iy = (ty - ky) / s;
                        if iy >= si.h {
                            continue;
                        }
                        for kx in 0..k {
                            let tx = ox + p;
                            if tx < kx || (tx - kx) % s != 0 {
                                continue;
                            }
                            let ix = (tx - kx) / s;
                            if ix >= si.w {
                                continue;
                            }
                            for ic in 0..ci {
                                acc += self.w[((ic * self.co + oc) * k + ky) * k + kx]
                                    * x[(ic * si.h + iy) * si.w + ix];
                            }
                        }
                    }
                    plane[oy * so.w + ox] = acc;
                }
            }
        });
        y
    }

    pub fn backward(
        &mut self,
        x: &[f64],
        si: Spatial,
        dy: &[f64],
        need_dx: bool,
    ) -> Option<Vec<f64>> {
        let so = self.out_spatial(si);
        let (ci, co, k, s, p) = (self.ci, self.co, self.k, self.s, self.p);
        debug_assert_eq!(dy.len(), co * so.len());

        // dW[ic][oc][ky][kx] = sum over (iy, ix): x[ic][iy][ix] * dy[oc][iy*s-p+ky][...]
        self.gw
            .par_chunks_mut(co * k * k)
            .enumerate()
            .for_each(|(ic, gslice)| {
                for oc in 0..co {
                    for ky in 0..k {
                        for kx in 0..k {
                            let mut acc = 0.0;
                            for iy in 0..si.h {
                                let oy = (iy * s + ky) as isize - p as isize;
                                if oy < 0 || oy >= so.h as isize {
                                    continue;
                                }
                                let xrow = (ic * si.h + iy) * si.w;
                                let drow = (oc * so.h + oy as usize) * so.w;
                                for ix in 0..si.w {
                                    let ox = (ix * s + kx) as isize - p as isize;
                                    if ox < 0 || ox >= so.w as isize {
                                        continue;
                                    }
                                    acc += x[xrow + ix] * dy[drow + ox as usize];
                                }
                            }
                            gslice[(oc * k + ky) * k + kx] += acc;
                        }
                    }
                }
            });
        self.gb.par_iter_mut().enumerate().for_each(|(oc, gb)| {
            *gb += dy[oc * so.len()..(oc + 1) * so.len()].iter().sum::<f64>();
        });

        if !need_dx {
            return None;
        }
        // dx is a plain strided convolution of dy with the kernel.
        let mut dx = vec![0.0; ci * si.len()];
        dx.par_chunks_mut(si.len()).enumerate().for_each(|(ic, plane)| {
            for iy in 0..si.h {
                for ix in 0..si.w {
                    let mut acc = 0.0;
                    for oc in 0..co {
                        for ky in 0..k {
                            let oy = (iy * s + ky) as isize - p as isize;
                            if oy < 0 || oy >= so.h as isize {
                                continue;
                            }
                            let drow = (oc * so.h + oy as usize) * so.w;
                            let wrow = ((ic * co + oc) * k + ky) * k;
                            for kx in 0..k {
                                let ox = (ix * s + kx) as isize - p as isize;
                                if ox < 0 || ox >= so.w as isize {
                                    continue;
                                }
                                acc += self.w[wrow + kx] * dy[drow + ox as usize];
                            }
                        }
                    }
                    plane[iy * si.w + ix] = acc;
                }
            }
        });
        Some(dx)
    }
}

/// Per-sample, per-channel normalization with learnable affine. The
/// batch-size-one resolution of the conv-norm-activation block: channel
/// statistics come from the single sample itself.
#[derive(Debug, Clone)]
pub struct InstanceNorm {
    pub c: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub g_gamma: Vec<f64>,
    pub g_beta: Vec<f64>,
}

/// Cache for the norm backward pass.
#[derive(Debug, Clone)]
pub struct NormCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl InstanceNorm {
    pub fn new(c: usize) -> Self {
        Self {
            c,
            gamma: vec![1.0; c],
            beta: vec![0.0; c],
            g_gamma: vec![0.0; c],
            g_beta: vec![0.0; c],
        }
    }

    pub fn zero_grad(&mut self) {
        self.g_gamma.iter_mut().for_each(|g| *g = 0.0);
        self.g_beta.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn forward(&self, x: &[f64], sp: Spatial) -> (Vec<f64>, NormCache) {
        let n = sp.len();
        debug_assert_eq!(x.len(), self.c * n);
        let mut y = vec![0.0; x.len()];
        let mut xhat = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; self.c];
        for c in 0..self.c {
            let xs = &x[c * n..(c + 1) * n];
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let istd = 1.0 / (var + NORM_EPS).sqrt();
            inv_std[c] = istd;
            for i in 0..n {
                let xh = (xs[i] - mean) * istd;
                xhat[c * n + i] = xh;
                y[c * n + i] = self.gamma[c] * xh + self.beta[c];
            }
        }
        (y, NormCache { xhat, inv_std })
    }

    pub fn backward(&mut self, cache: &NormCache, dy: &[f64], sp: Spatial) -> Vec<f64> {
        let n = sp.len();
        let nf = n as f64;
        let mut dx = vec![0.0; dy.len()];
        for c in 0..self.c {
            let xh = &cache.xhat[c * n..(c + 1) * n];
            let dys = &dy[c * n..(c + 1) * n];
            let sum_dy: f64 = dys.iter().sum();
            let sum_dy_xhat: f64 = dys.iter().zip(xh).map(|(d, h)| d * h).sum();
            self.g_beta[c] += sum_dy;
            self.g_gamma[c] += sum_dy_xhat;
            let scale = self.gamma[c] * cache.inv_std[c];
            for i in 0..n {
                dx[c * n + i] =
                    scale * (dys[i] - sum_dy / nf - xh[i] * sum_dy_xhat / nf);
            }
        }
        dx
    }
}

pub fn leaky_relu(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| if v > 0.0 { v } else { LEAKY_SLOPE * v })
        .collect()
}

/// Backward through leaky ReLU given the pre-activation values.
pub fn leaky_relu_backward(z: &[f64], dy: &[f64]) -> Vec<f64> {
    z.iter()
        .zip(dy)
        .map(|(&zv, &d)| if zv > 0.0 { d } else { LEAKY_SLOPE * d })
        .collect()
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

pub fn relu_backward(z: &[f64], dy: &[f64]) -> Vec<f64> {
    z.iter()
        .zip(dy)
        .map(|(&zv, &d)| if zv > 0.0 { d } else { 0.0 })
        .collect()
}

/// tanh squashed affinely onto [0, 1].
pub fn tanh_unit(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| (v.tanh() + 1.0) * 0.5).collect()
}

/// Backward through [`tanh_unit`] given its output values.
pub fn tanh_unit_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(dy)
        .map(|(&yv, &d)| {
            let t = 2.0 * yv - 1.0; // recover tanh value
            d * 0.5 * (1.0 - t * t)
        })
        .collect()
}
