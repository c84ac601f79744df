//! Synthetic adherent-raindrop corruption and paired-scene generation.
//!
//! Droplets act as local secondary lenses: inside each disk the image is
//! re-sampled through a radial magnification warp about the droplet
//! center and then Gaussian-blurred. Streaks blur and dim a straight
//! swath. Everything outside the droplet/streak support is left
//! bitwise untouched, and all operations are pure functions of their
//! seeds.

pub mod glyph;
pub mod scene;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::raster::{RasterImage, CHANNELS};

pub use scene::{render_scene, synthesize_dataset, SceneSpec};

/// One adherent droplet: a disk that magnifies and blurs what is behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Droplet {
    pub center: (f64, f64),
    pub radius: f64,
    pub magnification: f64,
    pub blur_sigma: f64,
}

/// One adherent streak: a straight swath that blurs and dims the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Streak {
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub width: f64,
    pub blur_sigma: f64,
}

/// The full parametric corruption for one image, reproducible from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropletField {
    pub droplets: Vec<Droplet>,
    pub streaks: Vec<Streak>,
    pub seed: u64,
}

impl DropletField {
    pub fn is_empty(&self) -> bool {
        self.droplets.is_empty() && self.streaks.is_empty()
    }

    /// True where a pixel is inside some droplet disk or streak swath —
    /// exactly the set of pixels [`apply_corruption`] may modify.
    pub fn support_mask(&self, width: u32, height: u32) -> Array2<bool> {
        let mut mask = Array2::from_elem((height as usize, width as usize), false);
        for d in &self.droplets {
            for y in 0..height {
                for x in 0..width {
                    if droplet_distance(d, x, y) < d.radius {
                        mask[[y as usize, x as usize]] = true;
                    }
                }
            }
        }
        for s in &self.streaks {
            for y in 0..height {
                for x in 0..width {
                    if segment_distance(s, x as f64, y as f64) < s.width / 2.0 {
                        mask[[y as usize, x as usize]] = true;
                    }
                }
            }
        }
        mask
    }
}

/// Streak intensity scale inside the swath (streaks dim what they cover).
pub const STREAK_ATTENUATION: f64 = 0.85;

/// Streaks are sampled at this fraction of the droplet rate.
pub const STREAK_DENSITY_RATIO: f64 = 0.25;

// Droplet parameter ranges, relative to min(width, height) where spatial.
const RADIUS_FRAC: (f64, f64) = (0.10, 0.20);
const MAGNIFICATION_RANGE: (f64, f64) = (1.6, 2.8);
const DROPLET_BLUR_RANGE: (f64, f64) = (0.6, 1.8);
const STREAK_WIDTH_FRAC: (f64, f64) = (0.03, 0.06);
const STREAK_LEN_FRAC: (f64, f64) = (0.25, 0.60);
const STREAK_BLUR_RANGE: (f64, f64) = (0.8, 1.6);

fn sample_poisson(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(lambda).expect("positive lambda");
    dist.sample(rng) as usize
}

/// Sample a droplet field. Expected droplet count is
/// `density * (w*h / 1e6)` (droplets per megapixel); streak count runs at
/// [`STREAK_DENSITY_RATIO`] of that. Deterministic in `seed`.
pub fn sample_droplet_field(image_dims: (u32, u32), density: f64, seed: u64) -> DropletField {
    assert!(density >= 0.0, "density must be non-negative");
    let (w, h) = image_dims;
    let (wf, hf) = (w as f64, h as f64);
    let min_dim = wf.min(hf);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let lambda = density * (wf * hf / 1.0e6);
    let n_droplets = sample_poisson(&mut rng, lambda);
    let mut droplets = Vec::with_capacity(n_droplets);
    for _ in 0..n_droplets {
        let center = (rng.gen_range(0.0..wf), rng.gen_range(0.0..hf));
        let radius = rng.gen_range(RADIUS_FRAC.0 * min_dim..RADIUS_FRAC.1 * min_dim);
        let magnification = rng.gen_range(MAGNIFICATION_RANGE.0..MAGNIFICATION_RANGE.1);
        let blur_sigma = rng.gen_range(DROPLET_BLUR_RANGE.0..DROPLET_BLUR_RANGE.1);
        droplets.push(Droplet {
            center,
            radius,
            magnification,
            blur_sigma,
        });
    }

    let n_streaks = sample_poisson(&mut rng, STREAK_DENSITY_RATIO * lambda);
    let mut streaks = Vec::with_capacity(n_streaks);
    for _ in 0..n_streaks {
        let start = (rng.gen_range(0.0..wf), rng.gen_range(0.0..hf * 0.6));
        let angle = std::f64::consts::FRAC_PI_2 + rng.gen_range(-0.35..0.35);
        let len = rng.gen_range(STREAK_LEN_FRAC.0 * hf..STREAK_LEN_FRAC.1 * hf);
        let end = (
            (start.0 + len * angle.cos()).clamp(0.0, wf),
            (start.1 + len * angle.sin()).clamp(0.0, hf),
        );
        let width = rng.gen_range(STREAK_WIDTH_FRAC.0 * min_dim..STREAK_WIDTH_FRAC.1 * min_dim);
        let blur_sigma = rng.gen_range(STREAK_BLUR_RANGE.0..STREAK_BLUR_RANGE.1);
        streaks.push(Streak {
            start,
            end,
            width: width.max(1.0),
            blur_sigma,
        });
    }

    DropletField {
        droplets,
        streaks,
        seed,
    }
}

#[inline]
fn droplet_distance(d: &Droplet, x: u32, y: u32) -> f64 {
    let dx = x as f64 - d.center.0;
    let dy = y as f64 - d.center.1;
    (dx * dx + dy * dy).sqrt()
}

/// Distance from point (px, py) to the streak's segment.
fn segment_distance(s: &Streak, px: f64, py: f64) -> f64 {
    let (ax, ay) = s.start;
    let (bx, by) = s.end;
    let (abx, aby) = (bx - ax, by - ay);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - ax) * abx + (py - ay) * aby) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ax + t * abx, ay + t * aby);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// Clamp-to-edge bilinear sample of one channel.
fn bilinear(img: &RasterImage, c: usize, sx: f64, sy: f64) -> f64 {
    let w = img.width() as i64;
    let h = img.height() as i64;
    let sx = sx.clamp(0.0, (w - 1) as f64);
    let sy = sy.clamp(0.0, (h - 1) as f64);
    let x0 = sx.floor() as i64;
    let y0 = sy.floor() as i64;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let v00 = img.get(c, x0 as u32, y0 as u32);
    let v10 = img.get(c, x1 as u32, y0 as u32);
    let v01 = img.get(c, x0 as u32, y1 as u32);
    let v11 = img.get(c, x1 as u32, y1 as u32);
    (1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 + (1.0 - fx) * fy * v01 + fx * fy * v11
}

/// Clamp-to-edge integer read of one channel.
#[inline]
fn clamped_get(img: &RasterImage, c: usize, x: i64, y: i64) -> f64 {
    let xc = x.clamp(0, img.width() as i64 - 1) as u32;
    let yc = y.clamp(0, img.height() as i64 - 1) as u32;
    img.get(c, xc, yc)
}

/// Normalized 1-D Gaussian taps over [-k, k] for the blur window.
fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let k = (3.0 * sigma).ceil() as i64;
    let mut taps: Vec<f64> = (-k..=k)
        .map(|q| (-((q * q) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Warp through one droplet, blur, and feather-blend onto `out`.
fn apply_droplet(out: &mut RasterImage, d: &Droplet) {
    let snapshot = out.clone();
    let (w, h) = (out.width() as i64, out.height() as i64);
    let (cx, cy) = d.center;
    let r = d.radius;

    let x_lo = ((cx - r).floor() as i64).max(0);
    let x_hi = ((cx + r).ceil() as i64).min(w - 1);
    let y_lo = ((cy - r).floor() as i64).max(0);
    let y_hi = ((cy + r).ceil() as i64).min(h - 1);
    if x_lo > x_hi || y_lo > y_hi {
        return;
    }

    // Warped view of the snapshot on the integer grid, over the bbox
    // expanded by the blur window so the blur never reads outside it.
    let taps = if d.blur_sigma > 0.0 {
        gaussian_taps(d.blur_sigma)
    } else {
        vec![1.0]
    };
    let k = (taps.len() / 2) as i64;
    let ex_lo = x_lo - k;
    let ex_hi = x_hi + k;
    let ey_lo = y_lo - k;
    let ey_hi = y_hi + k;
    let ew = (ex_hi - ex_lo + 1) as usize;
    let eh = (ey_hi - ey_lo + 1) as usize;
    let mut warped = vec![0.0; CHANNELS * eh * ew];
    let wix = |c: usize, x: i64, y: i64| -> usize {
        c * eh * ew + (y - ey_lo) as usize * ew + (x - ex_lo) as usize
    };
    for c in 0..CHANNELS {
        for y in ey_lo..=ey_hi {
            for x in ex_lo..=ex_hi {
                let sx = cx + (x as f64 - cx) / d.magnification;
                let sy = cy + (y as f64 - cy) / d.magnification;
                warped[wix(c, x, y)] = bilinear(&snapshot, c, sx, sy);
            }
        }
    }

    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let dist = droplet_distance(d, x as u32, y as u32);
            if dist >= r {
                continue;
            }
            let alpha = (r - dist).min(1.0);
            for c in 0..CHANNELS {
                let blurred = if d.blur_sigma > 0.0 {
                    let mut acc = 0.0;
                    for (qy, ty) in taps.iter().enumerate() {
                        for (qx, tx) in taps.iter().enumerate() {
                            let sxp = x + qx as i64 - k;
                            let syp = y + qy as i64 - k;
                            acc += ty * tx * warped[wix(c, sxp, syp)];
                        }
                    }
                    acc
                } else {
                    warped[wix(c, x, y)]
                };
                let base = snapshot.get(c, x as u32, y as u32);
                out.set(c, x as u32, y as u32, alpha * blurred + (1.0 - alpha) * base);
            }
        }
    }
}

/// Blur, dim, and feather-blend one streak swath onto `out`.
fn apply_streak(out: &mut RasterImage, s: &Streak) {
    let snapshot = out.clone();
    let (w, h) = (out.width() as i64, out.height() as i64);
    let half = s.width / 2.0;
    let x_lo = ((s.start.0.min(s.end.0) - half).floor() as i64).max(0);
    let x_hi = ((s.start.0.max(s.end.0) + half).ceil() as i64).min(w - 1);
    let y_lo = ((s.start.1.min(s.end.1) - half).floor() as i64).max(0);
    let y_hi = ((s.start.1.max(s.end.1) + half).ceil() as i64).min(h - 1);
    let taps = if s.blur_sigma > 0.0 {
        gaussian_taps(s.blur_sigma)
    } else {
        vec![1.0]
    };
    let k = (taps.len() / 2) as i64;

    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let dist = segment_distance(s, x as f64, y as f64);
            if dist >= half {
                continue;
            }
            let alpha = (half - dist).min(1.0);
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for (qy, ty) in taps.iter().enumerate() {
                    for (qx, tx) in taps.iter().enumerate() {
                        acc += ty
                            * tx
                            * clamped_get(&snapshot, c, x + qx as i64 - k, y + qy as i64 - k);
                    }
                }
                let streaked = STREAK_ATTENUATION * acc;
                let base = snapshot.get(c, x as u32, y as u32);
                out.set(c, x as u32, y as u32, alpha * streaked + (1.0 - alpha) * base);
            }
        }
    }
}

/// Corrupt `clear` with the field. Droplets compose in field order, then
/// streaks; each stage reads the output of the previous one. Pixels
/// outside the support union are bitwise unchanged.
pub fn apply_corruption(clear: &RasterImage, field: &DropletField) -> RasterImage {
    let mut out = clear.clone();
    for d in &field.droplets {
        apply_droplet(&mut out, d);
    }
    for s in &field.streaks {
        apply_streak(&mut out, s);
    }
    out
}

/// SplitMix64 step; used to derive independent per-item seeds.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt;
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
