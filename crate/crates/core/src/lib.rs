//! Raindrop-removal pipeline core.
//!
//! Adherent raindrops act as secondary lenses, occluding and distorting
//! the scene behind them. This crate trains a conditional GAN to map
//! rain-distorted images back to clear ones and measures the restoration
//! by detection counts over (input, predicted, clear) trios:
//!
//! - [`data`] — aligned-pair loading, deterministic splits, lossless
//!   trio storage.
//! - [`corruption`] — parametric droplet/streak corruption and synthetic
//!   scene generation with known car boxes.
//! - [`networks`] — encoder–decoder generator and patch discriminator
//!   with hand-derived backward passes.
//! - [`training`] — alternating adversarial updates with L1
//!   reconstruction, byte-exact checkpoints, overfit detection.
//! - [`evaluation`] — pluggable detectors and the two detection-ratio
//!   restoration terms.
//!
//! Everything is deterministic under a fixed seed: synthesis, splits,
//! initialization, dropout, shuffling, and the numeric kernels (which
//! parallelize only over disjoint output slices).

pub mod corruption;
pub mod data;
pub mod evaluation;
pub mod networks;
pub mod raster;
pub mod training;

pub use raster::RasterImage;
