//! Conditional-GAN networks: configurable encoder–decoder generator and
//! patch discriminator, as pure functions over parameter snapshots.

pub mod discriminator;
pub mod generator;
pub mod layers;
pub mod params;

use ndarray::Array2;
use thiserror::Error;

use crate::raster::RasterImage;

pub use discriminator::{DiscCache, Discriminator, DiscriminatorConfig};
pub use generator::{GenCache, Generator, GeneratorConfig};
pub use layers::Spatial;
pub use params::{ParamEntry, ParamSet, ParamsError};

/// 2-D grid of unbounded per-patch logits.
pub type PatchScoreGrid = Array2<f64>;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
}

/// Which network a parameter snapshot belongs to.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NetConfig {
    Generator(GeneratorConfig),
    Discriminator(DiscriminatorConfig),
}

/// Named weight arrays plus the config that determines their shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub config: NetConfig,
    pub params: ParamSet,
}

impl NetworkParams {
    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    pub fn shape_manifest(&self) -> Vec<(String, Vec<usize>)> {
        self.params.shape_manifest()
    }
}

/// Build generator weights for `config`, deterministically in `seed`.
pub fn build_generator(config: &GeneratorConfig, seed: u64) -> Result<NetworkParams, NetworkError> {
    let net = Generator::init(config.clone(), seed)?;
    Ok(NetworkParams {
        config: NetConfig::Generator(config.clone()),
        params: net.to_params(),
    })
}

/// Build discriminator weights for `config`, deterministically in `seed`.
pub fn build_discriminator(
    config: &DiscriminatorConfig,
    seed: u64,
) -> Result<NetworkParams, NetworkError> {
    let net = Discriminator::init(config.clone(), seed)?;
    Ok(NetworkParams {
        config: NetConfig::Discriminator(config.clone()),
        params: net.to_params(),
    })
}

fn generator_from(params: &NetworkParams) -> Result<Generator, NetworkError> {
    match &params.config {
        NetConfig::Generator(cfg) => Generator::from_params(cfg.clone(), &params.params),
        NetConfig::Discriminator(_) => Err(NetworkError::ConfigInvalid(
            "parameter snapshot belongs to a discriminator".into(),
        )),
    }
}

fn discriminator_from(params: &NetworkParams) -> Result<Discriminator, NetworkError> {
    match &params.config {
        NetConfig::Discriminator(cfg) => Discriminator::from_params(cfg.clone(), &params.params),
        NetConfig::Generator(_) => Err(NetworkError::ConfigInvalid(
            "parameter snapshot belongs to a generator".into(),
        )),
    }
}

/// Inference pass: distorted image in, restored image out. Deterministic
/// given `params`; output dimensions equal input dimensions and values
/// stay in [0, 1] by construction of the output head.
pub fn generator_forward(
    params: &NetworkParams,
    image: &RasterImage,
) -> Result<RasterImage, NetworkError> {
    let net = generator_from(params)?;
    if image.dims() != net.cfg.input_dims {
        return Err(NetworkError::ShapeMismatch(format!(
            "image is {:?} but the generator expects {:?}",
            image.dims(),
            net.cfg.input_dims
        )));
    }
    let out = net.forward_infer(image.flat());
    RasterImage::from_flat(image.width(), image.height(), out).map_err(|e| {
        NetworkError::ShapeMismatch(format!("generator output failed validation: {e}"))
    })
}

/// Score a (condition, candidate) pair into a patch-logit grid.
pub fn discriminator_forward(
    params: &NetworkParams,
    condition: &RasterImage,
    candidate: &RasterImage,
) -> Result<PatchScoreGrid, NetworkError> {
    let net = discriminator_from(params)?;
    if condition.dims() != candidate.dims() {
        return Err(NetworkError::ShapeMismatch(format!(
            "condition {:?} vs candidate {:?}",
            condition.dims(),
            candidate.dims()
        )));
    }
    let (gw, gh) = net.cfg.output_grid_dims(condition.dims())?;
    let sp = Spatial::new(condition.height() as usize, condition.width() as usize);
    let cache = net.forward(condition.flat(), candidate.flat(), sp);
    debug_assert_eq!((cache.grid.w as u32, cache.grid.h as u32), (gw, gh));
    Ok(Array2::from_shape_vec((gh as usize, gw as usize), cache.logits)
        .expect("grid dims match logits length"))
}
