//! Resumable training snapshots: weights, optimizer moments, RNG state,
//! and metric history in one archive. A save → load → save cycle
//! produces a byte-identical second archive.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::networks::{
    params, DiscriminatorConfig, GeneratorConfig, NetConfig, NetworkParams, ParamSet,
};

use super::{EpochMetrics, TrainConfig, TrainError};

/// RNG snapshot: ChaCha seed plus stream position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed_hex: String,
    pub word_pos_hex: String,
}

impl RngState {
    pub fn capture(rng: &rand_chacha::ChaCha8Rng) -> Self {
        Self {
            seed_hex: hex_encode(&rng.get_seed()),
            word_pos_hex: format!("{:x}", rng.get_word_pos()),
        }
    }

    pub fn restore(&self) -> Result<rand_chacha::ChaCha8Rng, TrainError> {
        use rand::SeedableRng;
        let seed_bytes = hex_decode(&self.seed_hex)
            .ok_or_else(|| TrainError::BadCheckpoint("bad rng seed hex".into()))?;
        let seed: [u8; 32] = seed_bytes
            .try_into()
            .map_err(|_| TrainError::BadCheckpoint("rng seed is not 32 bytes".into()))?;
        let word_pos = u128::from_str_radix(&self.word_pos_hex, 16)
            .map_err(|_| TrainError::BadCheckpoint("bad rng word position".into()))?;
        let mut rng = rand_chacha::ChaCha8Rng::from_seed(seed);
        rng.set_word_pos(word_pos);
        Ok(rng)
    }
}

fn hex_encode(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn hex_decode(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len() / 2)
        .map(|i| u8::from_str_radix(&s[2 * i..2 * i + 2], 16).ok())
        .collect()
}

/// Optimizer moments for one network, stored as named arrays mirroring
/// the parameter manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerDump {
    pub t: u64,
    pub m: ParamSet,
    pub v: ParamSet,
}

/// Complete training state at an epoch boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    pub generator: NetworkParams,
    pub discriminator: NetworkParams,
    pub gen_opt: OptimizerDump,
    pub disc_opt: OptimizerDump,
    pub rng: RngState,
    pub history: Vec<EpochMetrics>,
    pub train_config: TrainConfig,
    pub fingerprint: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    kind: String,
    epoch: usize,
    gen_config: GeneratorConfig,
    disc_config: DiscriminatorConfig,
    train_config: TrainConfig,
    gen_opt_t: u64,
    disc_opt_t: u64,
    rng: RngState,
    history: Vec<EpochMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fingerprint: Option<String>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let gen_cfg = match &self.generator.config {
            NetConfig::Generator(c) => c.clone(),
            _ => return Err(TrainError::BadCheckpoint("generator config mismatch".into())),
        };
        let disc_cfg = match &self.discriminator.config {
            NetConfig::Discriminator(c) => c.clone(),
            _ => {
                return Err(TrainError::BadCheckpoint(
                    "discriminator config mismatch".into(),
                ))
            }
        };
        let meta = CheckpointMeta {
            kind: "checkpoint".to_string(),
            epoch: self.epoch,
            gen_config: gen_cfg,
            disc_config: disc_cfg,
            train_config: self.train_config.clone(),
            gen_opt_t: self.gen_opt.t,
            disc_opt_t: self.disc_opt.t,
            rng: self.rng.clone(),
            history: self.history.clone(),
            fingerprint: self.fingerprint.clone(),
        };
        let meta_value = serde_json::to_value(&meta).expect("meta serializes");
        let file = File::create(path).map_err(|e| TrainError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        params::write_archive(
            BufWriter::new(file),
            &meta_value,
            &[
                ("gen", &self.generator.params),
                ("disc", &self.discriminator.params),
                ("gen_m", &self.gen_opt.m),
                ("gen_v", &self.gen_opt.v),
                ("disc_m", &self.disc_opt.m),
                ("disc_v", &self.disc_opt.v),
            ],
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let file = File::open(path).map_err(|e| TrainError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let (meta_value, mut sets) = params::read_archive(BufReader::new(file))?;
        let meta: CheckpointMeta = serde_json::from_value(meta_value)
            .map_err(|e| TrainError::BadCheckpoint(e.to_string()))?;
        let mut take = |prefix: &str| -> Result<ParamSet, TrainError> {
            let pos = sets
                .iter()
                .position(|(p, _)| p == prefix)
                .ok_or_else(|| TrainError::BadCheckpoint(format!("missing section {prefix}")))?;
            Ok(sets.swap_remove(pos).1)
        };
        Ok(Self {
            epoch: meta.epoch,
            generator: NetworkParams {
                config: NetConfig::Generator(meta.gen_config),
                params: take("gen")?,
            },
            discriminator: NetworkParams {
                config: NetConfig::Discriminator(meta.disc_config),
                params: take("disc")?,
            },
            gen_opt: OptimizerDump {
                t: meta.gen_opt_t,
                m: take("gen_m")?,
                v: take("gen_v")?,
            },
            disc_opt: OptimizerDump {
                t: meta.disc_opt_t,
                m: take("disc_m")?,
                v: take("disc_v")?,
            },
            rng: meta.rng,
            history: meta.history,
            train_config: meta.train_config,
            fingerprint: meta.fingerprint,
        })
    }
}

/// Build an optimizer dump from moment vectors, borrowing names and
/// shapes from the matching parameter snapshot.
pub fn dump_optimizer(t: u64, params: &ParamSet, m: &[Vec<f64>], v: &[Vec<f64>]) -> OptimizerDump {
    assert_eq!(params.entries.len(), m.len());
    let build = |vecs: &[Vec<f64>]| -> ParamSet {
        let mut set = ParamSet::default();
        for (entry, data) in params.entries.iter().zip(vecs) {
            set.push(entry.name.clone(), entry.shape.clone(), data.clone());
        }
        set
    };
    OptimizerDump {
        t,
        m: build(m),
        v: build(v),
    }
}
