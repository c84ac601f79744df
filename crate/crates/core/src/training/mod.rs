//! Adversarial training: alternating discriminator/generator updates
//! with the conditional objective plus weighted L1 reconstruction,
//! epoch-level validation, checkpointing, and overfit detection.
//!
//! Every source of randomness is seeded from the config, and all math
//! kernels reduce in a fixed order, so identical configs and data
//! produce bit-identical runs.

pub mod adam;
pub mod checkpoint;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corruption::derive_seed;
use crate::data::{AlignedPair, DatasetSplit};
use crate::networks::{
    Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, NetConfig, NetworkError,
    NetworkParams, PatchScoreGrid, Spatial,
};
use crate::raster::RasterImage;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, OptimizerDump, RngState};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite loss at {context}: d_loss={d_loss}, g_adv={g_adv}, g_l1={g_l1}")]
    NonFiniteLoss {
        context: String,
        d_loss: f64,
        g_adv: f64,
        g_l1: f64,
    },
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("invalid train config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Params(#[from] crate::networks::ParamsError),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Hyperparameters; paper schedule by default (34 epochs, batch one),
/// remaining values from the cited training procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub l1_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 34,
            batch_size: 1,
            learning_rate: 2e-4,
            adam_beta1: 0.5,
            l1_weight: 100.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs < 1 {
            return Err(TrainError::ConfigInvalid("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(TrainError::ConfigInvalid("batch_size must be >= 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(TrainError::ConfigInvalid("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) {
            return Err(TrainError::ConfigInvalid("adam_beta1 must be in [0, 1)".into()));
        }
        if self.l1_weight < 0.0 {
            return Err(TrainError::ConfigInvalid("l1_weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-epoch aggregate losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_adv: f64,
    pub train_l1: f64,
    pub val_l1: f64,
}

/// Losses from one optimization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub d_loss: f64,
    pub g_adv: f64,
    pub g_l1: f64,
    pub g_total: f64,
}

/// Numerically stable softplus: max(x, 0) + log1p(exp(-|x|)).
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Numerically stable logistic sigmoid.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn mean_softplus_neg(logits: &[f64]) -> f64 {
    logits.iter().map(|&v| softplus(-v)).sum::<f64>() / logits.len() as f64
}

fn mean_softplus(logits: &[f64]) -> f64 {
    logits.iter().map(|&v| softplus(v)).sum::<f64>() / logits.len() as f64
}

fn mean_abs_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Binary cross-entropy on logits, pushing real patches toward 1 and
/// fake patches toward 0: mean of [softplus(-real) + softplus(fake)] / 2.
pub fn discriminator_loss(
    real_logits: &PatchScoreGrid,
    fake_logits: &PatchScoreGrid,
) -> Result<f64, TrainError> {
    if real_logits.dim() != fake_logits.dim() {
        return Err(TrainError::ShapeMismatch(format!(
            "real grid {:?} vs fake grid {:?}",
            real_logits.dim(),
            fake_logits.dim()
        )));
    }
    let real = real_logits.as_slice().expect("standard layout");
    let fake = fake_logits.as_slice().expect("standard layout");
    Ok(0.5 * (mean_softplus_neg(real) + mean_softplus(fake)))
}

/// Non-saturating generator objective with L1 reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorLoss {
    pub total: f64,
    pub adv: f64,
    pub l1: f64,
}

pub fn generator_loss(
    fake_logits: &PatchScoreGrid,
    predicted: &RasterImage,
    target: &RasterImage,
    l1_weight: f64,
) -> Result<GeneratorLoss, TrainError> {
    if predicted.dims() != target.dims() {
        return Err(TrainError::ShapeMismatch(format!(
            "predicted {:?} vs target {:?}",
            predicted.dims(),
            target.dims()
        )));
    }
    let adv = mean_softplus_neg(fake_logits.as_slice().expect("standard layout"));
    let l1 = mean_abs_slices(predicted.flat(), target.flat());
    Ok(GeneratorLoss {
        total: adv + l1_weight * l1,
        adv,
        l1,
    })
}

/// Overfit analysis over an epoch-metric history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverfitReport {
    /// Epoch index minimizing validation L1 (earliest on ties).
    pub best_epoch: usize,
    /// First epoch at which validation L1 rose for `patience`
    /// consecutive epochs while train L1 fell.
    pub overfit_at: Option<usize>,
}

pub fn detect_overfit(history: &[EpochMetrics], patience: usize) -> OverfitReport {
    assert!(!history.is_empty(), "history must be nonempty");
    assert!(patience >= 1, "patience must be >= 1");
    let mut best_epoch = 0;
    for (i, m) in history.iter().enumerate() {
        if m.val_l1 < history[best_epoch].val_l1 {
            best_epoch = i;
        }
    }
    let mut overfit_at = None;
    'outer: for i in patience..history.len() {
        for j in i - patience + 1..=i {
            let rising = history[j].val_l1 > history[j - 1].val_l1;
            let train_falling = history[j].train_l1 < history[j - 1].train_l1;
            if !(rising && train_falling) {
                continue 'outer;
            }
        }
        overfit_at = Some(i);
        break;
    }
    OverfitReport {
        best_epoch,
        overfit_at,
    }
}

const GEN_SEED_SALT: u64 = 0x6765_6e65_7261_746f; // network init domains
const DISC_SEED_SALT: u64 = 0x6469_7363_7269_6d69;
const DROPOUT_SEED_SALT: u64 = 0x6472_6f70_6f75_7400;
const SHUFFLE_SEED_SALT: u64 = 0x7368_7566_666c_6500;

/// Live training state. One exclusive owner mutates it; checkpoints are
/// immutable snapshots taken at epoch boundaries.
pub struct TrainState {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub gen_opt: AdamState,
    pub disc_opt: AdamState,
    pub rng: ChaCha8Rng,
    pub epoch: usize,
    pub history: Vec<EpochMetrics>,
    pub config: TrainConfig,
    pub fingerprint: Option<String>,
}

impl TrainState {
    pub fn new(
        gen_cfg: &GeneratorConfig,
        disc_cfg: &DiscriminatorConfig,
        config: &TrainConfig,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        let generator = Generator::init(gen_cfg.clone(), derive_seed(config.seed, GEN_SEED_SALT))?;
        let discriminator =
            Discriminator::init(disc_cfg.clone(), derive_seed(config.seed, DISC_SEED_SALT))?;
        let gen_sizes: Vec<usize> = generator
            .to_params()
            .entries
            .iter()
            .map(|e| e.data.len())
            .collect();
        let disc_sizes: Vec<usize> = discriminator
            .to_params()
            .entries
            .iter()
            .map(|e| e.data.len())
            .collect();
        Ok(Self {
            generator,
            discriminator,
            gen_opt: AdamState::new(&gen_sizes),
            disc_opt: AdamState::new(&disc_sizes),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, DROPOUT_SEED_SALT)),
            epoch: 0,
            history: Vec::new(),
            config: config.clone(),
            fingerprint: None,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let gen_params = self.generator.to_params();
        let disc_params = self.discriminator.to_params();
        Checkpoint {
            epoch: self.epoch,
            gen_opt: checkpoint::dump_optimizer(
                self.gen_opt.t,
                &gen_params,
                &self.gen_opt.m,
                &self.gen_opt.v,
            ),
            disc_opt: checkpoint::dump_optimizer(
                self.disc_opt.t,
                &disc_params,
                &self.disc_opt.m,
                &self.disc_opt.v,
            ),
            generator: NetworkParams {
                config: NetConfig::Generator(self.generator.cfg.clone()),
                params: gen_params,
            },
            discriminator: NetworkParams {
                config: NetConfig::Discriminator(self.discriminator.cfg.clone()),
                params: disc_params,
            },
            rng: RngState::capture(&self.rng),
            history: self.history.clone(),
            train_config: self.config.clone(),
            fingerprint: self.fingerprint.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, TrainError> {
        let gen_cfg = match &ckpt.generator.config {
            NetConfig::Generator(c) => c.clone(),
            _ => return Err(TrainError::BadCheckpoint("not a generator snapshot".into())),
        };
        let disc_cfg = match &ckpt.discriminator.config {
            NetConfig::Discriminator(c) => c.clone(),
            _ => {
                return Err(TrainError::BadCheckpoint(
                    "not a discriminator snapshot".into(),
                ))
            }
        };
        let generator = Generator::from_params(gen_cfg, &ckpt.generator.params)?;
        let discriminator = Discriminator::from_params(disc_cfg, &ckpt.discriminator.params)?;
        let restore_opt = |dump: &OptimizerDump| -> AdamState {
            AdamState {
                t: dump.t,
                m: dump.m.entries.iter().map(|e| e.data.clone()).collect(),
                v: dump.v.entries.iter().map(|e| e.data.clone()).collect(),
            }
        };
        Ok(Self {
            gen_opt: restore_opt(&ckpt.gen_opt),
            disc_opt: restore_opt(&ckpt.disc_opt),
            generator,
            discriminator,
            rng: ckpt.rng.restore()?,
            epoch: ckpt.epoch,
            history: ckpt.history.clone(),
            config: ckpt.train_config.clone(),
            fingerprint: ckpt.fingerprint.clone(),
        })
    }

    fn input_spatial(&self) -> Spatial {
        let (w, h) = self.generator.cfg.input_dims;
        Spatial::new(h as usize, w as usize)
    }
}

fn check_finite(
    context: &str,
    d_loss: f64,
    g_adv: f64,
    g_l1: f64,
) -> Result<(), TrainError> {
    if d_loss.is_finite() && g_adv.is_finite() && g_l1.is_finite() {
        Ok(())
    } else {
        Err(TrainError::NonFiniteLoss {
            context: context.to_string(),
            d_loss,
            g_adv,
            g_l1,
        })
    }
}

/// One optimization step over a batch: a discriminator update on
/// (real, detached-fake) followed by a generator update against the
/// refreshed discriminator.
pub fn train_step(state: &mut TrainState, batch: &[&AlignedPair]) -> Result<StepMetrics, TrainError> {
    assert!(!batch.is_empty(), "batch must be nonempty");
    let dims = state.generator.cfg.input_dims;
    for pair in batch {
        if pair.distorted.dims() != dims {
            return Err(TrainError::ShapeMismatch(format!(
                "pair {} is {:?} but the generator expects {:?}",
                pair.id,
                pair.distorted.dims(),
                dims
            )));
        }
    }
    let sp = state.input_spatial();
    let scale = 1.0 / batch.len() as f64;
    let ids: Vec<&str> = batch.iter().map(|p| p.id.as_str()).collect();
    let context = format!("pairs [{}]", ids.join(", "));

    // Discriminator pass: real (distorted, clear) vs detached fake.
    state.discriminator.zero_grad();
    let mut d_loss_sum = 0.0;
    let mut fakes = Vec::with_capacity(batch.len());
    let mut gen_caches = Vec::with_capacity(batch.len());
    for pair in batch {
        let gcache = state
            .generator
            .forward_train(pair.distorted.flat(), Some(&mut state.rng));
        let fake = gcache.output.clone();

        let real_cache = state
            .discriminator
            .forward(pair.distorted.flat(), pair.clear.flat(), sp);
        let fake_cache = state.discriminator.forward(pair.distorted.flat(), &fake, sp);
        let n = real_cache.logits.len() as f64;
        let d_loss = 0.5 * (mean_softplus_neg(&real_cache.logits) + mean_softplus(&fake_cache.logits));
        d_loss_sum += d_loss;

        let d_real: Vec<f64> = real_cache
            .logits
            .iter()
            .map(|&v| -0.5 * sigmoid(-v) / n)
            .collect();
        let d_fake: Vec<f64> = fake_cache
            .logits
            .iter()
            .map(|&v| 0.5 * sigmoid(v) / n)
            .collect();
        state.discriminator.backward(&real_cache, &d_real, true, false);
        state.discriminator.backward(&fake_cache, &d_fake, true, false);

        fakes.push(fake);
        gen_caches.push(gcache);
    }
    let d_loss = d_loss_sum * scale;
    check_finite(&context, d_loss, 0.0, 0.0)?;
    state.disc_opt.step(
        state.config.learning_rate,
        state.config.adam_beta1,
        scale,
        state.discriminator.param_grad_pairs(),
    );

    // Generator pass against the updated discriminator.
    state.generator.zero_grad();
    let mut adv_sum = 0.0;
    let mut l1_sum = 0.0;
    for (pair, (fake, gcache)) in batch.iter().zip(fakes.iter().zip(&gen_caches)) {
        let fake_cache = state.discriminator.forward(pair.distorted.flat(), fake, sp);
        let n = fake_cache.logits.len() as f64;
        adv_sum += mean_softplus_neg(&fake_cache.logits);
        let target = pair.clear.flat();
        l1_sum += mean_abs_slices(fake, target);

        let d_logits: Vec<f64> = fake_cache
            .logits
            .iter()
            .map(|&v| -sigmoid(-v) / n)
            .collect();
        let dinput = state
            .discriminator
            .backward(&fake_cache, &d_logits, false, true)
            .expect("input gradient requested");
        let half = fake.len();
        let m = fake.len() as f64;
        let lw = state.config.l1_weight;
        let d_pred: Vec<f64> = (0..half)
            .map(|i| {
                let l1_grad = lw * (fake[i] - target[i]).signum() / m;
                dinput[half + i] + l1_grad
            })
            .collect();
        state.generator.backward(gcache, &d_pred);
    }
    let g_adv = adv_sum * scale;
    let g_l1 = l1_sum * scale;
    check_finite(&context, d_loss, g_adv, g_l1)?;
    state.gen_opt.step(
        state.config.learning_rate,
        state.config.adam_beta1,
        scale,
        state.generator.param_grad_pairs(),
    );

    Ok(StepMetrics {
        d_loss,
        g_adv,
        g_l1,
        g_total: g_adv + state.config.l1_weight * g_l1,
    })
}

/// Progress hooks; default implementations ignore everything.
pub trait TrainCallback {
    fn on_step(&mut self, _epoch: usize, _step: usize, _metrics: &StepMetrics) {}
    fn on_epoch(&mut self, _metrics: &EpochMetrics) {}
}

/// Callback that does nothing.
pub struct NoopCallback;

impl TrainCallback for NoopCallback {}

/// Mean validation L1 of the current generator over `pairs` (inference
/// mode, read-only).
pub fn validation_l1(generator: &Generator, pairs: &[AlignedPair]) -> f64 {
    if pairs.is_empty() {
        return f64::NAN;
    }
    let sum: f64 = pairs
        .iter()
        .map(|p| {
            let pred = generator.forward_infer(p.distorted.flat());
            mean_abs_slices(&pred, p.clear.flat())
        })
        .sum();
    sum / pairs.len() as f64
}

/// Run the remaining epochs on `state`. Shuffles the training pairs each
/// epoch with a seed derived from (config.seed, epoch), evaluates
/// validation L1, snapshots a checkpoint per epoch into
/// `checkpoint_dir` when given, and appends metrics.
pub fn train_epochs(
    state: &mut TrainState,
    split: &DatasetSplit,
    callbacks: &mut dyn TrainCallback,
    checkpoint_dir: Option<&Path>,
) -> Result<Vec<EpochMetrics>, TrainError> {
    if split.train.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    if let Some(dir) = checkpoint_dir {
        fs::create_dir_all(dir).map_err(|e| TrainError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    let mut emitted = Vec::new();
    while state.epoch < state.config.epochs {
        let epoch = state.epoch;
        let mut order: Vec<usize> = (0..split.train.len()).collect();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(
            state.config.seed,
            SHUFFLE_SEED_SALT ^ epoch as u64,
        ));
        order.shuffle(&mut shuffle_rng);

        let mut d_sum = 0.0;
        let mut adv_sum = 0.0;
        let mut l1_sum = 0.0;
        let mut steps = 0usize;
        for (step, chunk) in order.chunks(state.config.batch_size).enumerate() {
            let batch: Vec<&AlignedPair> = chunk.iter().map(|&i| &split.train[i]).collect();
            let metrics = train_step(state, &batch).map_err(|e| match e {
                TrainError::NonFiniteLoss {
                    context,
                    d_loss,
                    g_adv,
                    g_l1,
                } => TrainError::NonFiniteLoss {
                    context: format!("epoch {epoch}, step {step}, {context}"),
                    d_loss,
                    g_adv,
                    g_l1,
                },
                other => other,
            })?;
            callbacks.on_step(epoch, step, &metrics);
            d_sum += metrics.d_loss;
            adv_sum += metrics.g_adv;
            l1_sum += metrics.g_l1;
            steps += 1;
        }

        let train_l1 = l1_sum / steps as f64;
        let val_l1 = if split.validation.is_empty() {
            // No validation pairs: echo the train reconstruction loss so
            // the history stays finite and comparable.
            train_l1
        } else {
            validation_l1(&state.generator, &split.validation)
        };
        let metrics = EpochMetrics {
            epoch,
            d_loss: d_sum / steps as f64,
            g_adv: adv_sum / steps as f64,
            train_l1,
            val_l1,
        };
        state.epoch += 1;
        state.history.push(metrics.clone());
        callbacks.on_epoch(&metrics);
        emitted.push(metrics);

        if let Some(dir) = checkpoint_dir {
            let path = dir.join(format!("ckpt_ep{:03}.dkpt", state.epoch));
            state.to_checkpoint().save(&path)?;
        }
    }
    Ok(emitted)
}

/// Fresh training run over the split; returns the final checkpoint and
/// the full metric history.
pub fn train(
    gen_cfg: &GeneratorConfig,
    disc_cfg: &DiscriminatorConfig,
    config: &TrainConfig,
    split: &DatasetSplit,
    callbacks: &mut dyn TrainCallback,
    checkpoint_dir: Option<&Path>,
) -> Result<(Checkpoint, Vec<EpochMetrics>), TrainError> {
    let mut state = TrainState::new(gen_cfg, disc_cfg, config)?;
    let history = train_epochs(&mut state, split, callbacks, checkpoint_dir)?;
    Ok((state.to_checkpoint(), history))
}

#[derive(Serialize)]
struct MetricsHeader<'a> {
    schedule: Schedule,
    learning_rate: f64,
    adam_beta1: f64,
    l1_weight: f64,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fingerprint: Option<&'a str>,
}

#[derive(Serialize)]
struct Schedule {
    epochs: usize,
    batch_size: usize,
}

/// Serialize a run's config header plus one JSON object per epoch.
pub fn write_metrics_jsonl(
    out: &mut dyn Write,
    config: &TrainConfig,
    fingerprint: Option<&str>,
    history: &[EpochMetrics],
) -> std::io::Result<()> {
    let header = MetricsHeader {
        schedule: Schedule {
            epochs: config.epochs,
            batch_size: config.batch_size,
        },
        learning_rate: config.learning_rate,
        adam_beta1: config.adam_beta1,
        l1_weight: config.l1_weight,
        seed: config.seed,
        fingerprint,
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("header"))?;
    for m in history {
        writeln!(out, "{}", serde_json::to_string(m).expect("metrics"))?;
    }
    Ok(())
}

/// Diagnostic entry points used by the gradient-check suites: loss and
/// parameter gradients through dropout-free forward passes.
pub mod check {
    use super::*;

    /// Total generator loss (adv + lambda * L1) with the discriminator
    /// frozen, dropout off.
    pub fn generator_total_loss(
        generator: &Generator,
        discriminator: &Discriminator,
        pair: &AlignedPair,
        l1_weight: f64,
    ) -> f64 {
        let (w, h) = generator.cfg.input_dims;
        let sp = Spatial::new(h as usize, w as usize);
        let pred = generator.forward_infer(pair.distorted.flat());
        let cache = discriminator.forward(pair.distorted.flat(), &pred, sp);
        mean_softplus_neg(&cache.logits) + l1_weight * mean_abs_slices(&pred, pair.clear.flat())
    }

    /// Analytic gradients of [`generator_total_loss`] for every
    /// generator parameter, in canonical order.
    pub fn generator_grads(
        generator: &mut Generator,
        discriminator: &mut Discriminator,
        pair: &AlignedPair,
        l1_weight: f64,
    ) -> (f64, Vec<Vec<f64>>) {
        let (w, h) = generator.cfg.input_dims;
        let sp = Spatial::new(h as usize, w as usize);
        generator.zero_grad();
        let gcache = generator.forward_train(pair.distorted.flat(), None);
        let pred = gcache.output.clone();
        let dcache = discriminator.forward(pair.distorted.flat(), &pred, sp);
        let n = dcache.logits.len() as f64;
        let loss = mean_softplus_neg(&dcache.logits)
            + l1_weight * mean_abs_slices(&pred, pair.clear.flat());

        let d_logits: Vec<f64> = dcache.logits.iter().map(|&v| -sigmoid(-v) / n).collect();
        let dinput = discriminator
            .backward(&dcache, &d_logits, false, true)
            .expect("input gradient requested");
        let half = pred.len();
        let m = pred.len() as f64;
        let target = pair.clear.flat();
        let d_pred: Vec<f64> = (0..half)
            .map(|i| dinput[half + i] + l1_weight * (pred[i] - target[i]).signum() / m)
            .collect();
        generator.backward(&gcache, &d_pred);
        let grads = generator
            .param_grad_pairs()
            .into_iter()
            .map(|(_, g)| g.clone())
            .collect();
        (loss, grads)
    }

    /// Discriminator loss on (real, fixed-fake) for a frozen generator.
    pub fn discriminator_total_loss(
        discriminator: &Discriminator,
        generator: &Generator,
        pair: &AlignedPair,
    ) -> f64 {
        let (w, h) = generator.cfg.input_dims;
        let sp = Spatial::new(h as usize, w as usize);
        let fake = generator.forward_infer(pair.distorted.flat());
        let real = discriminator.forward(pair.distorted.flat(), pair.clear.flat(), sp);
        let fakec = discriminator.forward(pair.distorted.flat(), &fake, sp);
        0.5 * (mean_softplus_neg(&real.logits) + mean_softplus(&fakec.logits))
    }

    /// Analytic gradients of [`discriminator_total_loss`] for every
    /// discriminator parameter, in canonical order.
    pub fn discriminator_grads(
        discriminator: &mut Discriminator,
        generator: &Generator,
        pair: &AlignedPair,
    ) -> (f64, Vec<Vec<f64>>) {
        let (w, h) = generator.cfg.input_dims;
        let sp = Spatial::new(h as usize, w as usize);
        discriminator.zero_grad();
        let fake = generator.forward_infer(pair.distorted.flat());
        let real = discriminator.forward(pair.distorted.flat(), pair.clear.flat(), sp);
        let fakec = discriminator.forward(pair.distorted.flat(), &fake, sp);
        let n = real.logits.len() as f64;
        let loss = 0.5 * (mean_softplus_neg(&real.logits) + mean_softplus(&fakec.logits));
        let d_real: Vec<f64> = real.logits.iter().map(|&v| -0.5 * sigmoid(-v) / n).collect();
        let d_fake: Vec<f64> = fakec.logits.iter().map(|&v| 0.5 * sigmoid(v) / n).collect();
        discriminator.backward(&real, &d_real, true, false);
        discriminator.backward(&fakec, &d_fake, true, false);
        let grads = discriminator
            .param_grad_pairs()
            .into_iter()
            .map(|(_, g)| g.clone())
            .collect();
        (loss, grads)
    }
}
