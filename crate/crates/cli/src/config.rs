//! Run configuration: JSON file, flag overrides, and content fingerprint.
//!
//! Precedence is flag > file > built-in default. The fingerprint is the
//! SHA-256 of the fully merged config's canonical JSON; every artifact a
//! run produces embeds it so mixed-provenance evaluations are caught.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use derain_core::evaluation::DetectorSpec;
use derain_core::networks::{DiscriminatorConfig, GeneratorConfig};
use derain_core::training::TrainConfig;

pub const CONFIG_ENV_VAR: &str = "DERAIN_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionSection {
    /// Droplets per megapixel.
    pub density: f64,
}

impl Default for CorruptionSection {
    fn default() -> Self {
        Self { density: 5000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSection {
    pub base_channels: usize,
    pub depth: usize,
    pub dropout: bool,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        Self {
            base_channels: 8,
            depth: 3,
            dropout: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorSection {
    pub base_channels: usize,
    pub n_layers: usize,
}

impl Default for DiscriminatorSection {
    fn default() -> Self {
        Self {
            base_channels: 8,
            n_layers: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub l1_weight: f64,
    /// Epochs of rising validation L1 (with falling train L1) that flag
    /// overfit onset.
    pub overfit_patience: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            adam_beta1: t.adam_beta1,
            l1_weight: t.l1_weight,
            overfit_patience: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SplitSection {
    /// Explicit split sizes; when absent the 80:1:1 proportional rule
    /// applies.
    pub train: Option<usize>,
    pub val: Option<usize>,
    pub test: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSection {
    pub kind: String,
    pub parameters: BTreeMap<String, String>,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            kind: "oracle".to_string(),
            parameters: BTreeMap::new(),
        }
    }
}

/// The merged view every command runs from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub dims: Dims,
    pub naming_scheme: NamingScheme,
    pub corruption: CorruptionSection,
    pub generator: GeneratorSection,
    pub discriminator: DiscriminatorSection,
    pub train: TrainSection,
    pub split: SplitSection,
    pub detector: DetectorSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims(pub u32, pub u32);

impl Default for Dims {
    fn default() -> Self {
        Dims(64, 64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamingScheme(pub String);

impl Default for NamingScheme {
    fn default() -> Self {
        NamingScheme("suffix".to_string())
    }
}

impl RunConfig {
    /// Load from `path` if given, else from `$DERAIN_CONFIG`, else
    /// defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let resolved: Option<PathBuf> = match path {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV_VAR).map(PathBuf::from),
        };
        match resolved {
            None => Ok(Self::default()),
            Some(p) => {
                let raw = std::fs::read_to_string(&p)
                    .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
                serde_json::from_str(&raw)
                    .map_err(|e| format!("cannot parse config {}: {e}", p.display()))
            }
        }
    }

    /// SHA-256 over the canonical JSON of the merged config.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn generator_config(&self, dims: (u32, u32)) -> GeneratorConfig {
        GeneratorConfig {
            base_channels: self.generator.base_channels,
            depth: self.generator.depth,
            input_dims: dims,
            dropout: self.generator.dropout,
        }
    }

    pub fn discriminator_config(&self) -> DiscriminatorConfig {
        DiscriminatorConfig {
            base_channels: self.discriminator.base_channels,
            n_layers: self.discriminator.n_layers,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            adam_beta1: self.train.adam_beta1,
            l1_weight: self.train.l1_weight,
            seed: self.seed,
        }
    }

    pub fn detector_spec(&self) -> DetectorSpec {
        DetectorSpec {
            kind: self.detector.kind.clone(),
            parameters: self.detector.parameters.clone(),
        }
    }

    /// Split counts: explicit values win, otherwise the 80:1:1 rule.
    pub fn split_counts(&self, available: usize) -> (usize, usize, usize) {
        let proportional = derain_core::data::proportional_counts(available);
        (
            self.split.train.unwrap_or(proportional.0),
            self.split.val.unwrap_or(proportional.1),
            self.split.test.unwrap_or(proportional.2),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_changes_with_content() {
        let base = RunConfig::default();
        let other = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        assert_ne!(base.fingerprint(), other.fingerprint());
        assert_eq!(base.fingerprint(), RunConfig::default().fingerprint());
        assert_eq!(base.fingerprint().len(), 64);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let parsed: RunConfig =
            serde_json::from_str(r#"{"seed": 9, "train": {"epochs": 3}}"#).unwrap();
        assert_eq!(parsed.seed, 9);
        assert_eq!(parsed.train.epochs, 3);
        assert_eq!(parsed.train.batch_size, 1);
        assert_eq!(parsed.dims, Dims(64, 64));
    }

    #[test]
    fn split_counts_fall_back_to_proportional() {
        let config = RunConfig::default();
        assert_eq!(config.split_counts(82), (80, 1, 1));
        let explicit = RunConfig {
            split: SplitSection {
                train: Some(200),
                val: Some(20),
                test: Some(40),
            },
            ..RunConfig::default()
        };
        assert_eq!(explicit.split_counts(260), (200, 20, 40));
    }
}
