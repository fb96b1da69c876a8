use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SplitRatios;
use crate::losses::LossWeights;
use crate::models::{CycleGanConfig, UNetCBAMConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Unet,
    Cyclegan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 8,
            max_epochs: 200,
            patience: 10,
        }
    }
}

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub model: ModelKind,
    pub seed: u64,
    pub image_size: usize,
    pub output_dir: PathBuf,
    pub unet: UNetCBAMConfig,
    pub cyclegan: CycleGanConfig,
    pub optim: OptimConfig,
    pub loss: LossWeights,
    pub split: SplitRatios,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::pairwise()
    }
}

impl RunConfig {
    pub fn pairwise() -> Self {
        Self {
            name: "pairwise".into(),
            model: ModelKind::Unet,
            seed: 0,
            image_size: 64,
            output_dir: PathBuf::from("runs"),
            unet: UNetCBAMConfig::default(),
            cyclegan: CycleGanConfig::default(),
            optim: OptimConfig::default(),
            loss: LossWeights::default(),
            split: SplitRatios::default(),
        }
    }

    pub fn cyclegan() -> Self {
        Self {
            name: "cyclegan".into(),
            model: ModelKind::Cyclegan,
            optim: OptimConfig { learning_rate: 1e-4, beta1: 0.5, ..OptimConfig::default() },
            ..Self::pairwise()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileMissing(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?)
            .map_err(|e| Error::WriteError { path: path.to_path_buf(), reason: e.to_string() })
    }

    /// Hex SHA-256 over the canonical JSON rendering.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Sets a dotted key such as `optim.learning_rate` from its textual value.
    /// Values parse as TOML literals, falling back to a plain string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = format!("v = {value}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));

        let mut slot = &mut root;
        for part in key.split('.') {
            slot = slot
                .as_table_mut()
                .and_then(|t| t.get_mut(part))
                .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
        }
        *slot = match (&*slot, parsed) {
            (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (toml::Value::String(_), p) if !p.is_str() => toml::Value::String(value.to_string()),
            (_, p) => p,
        };
        *self = root.try_into().map_err(|e: toml::de::Error| Error::Config(format!("{key}: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_is_exact() {
        let mut c = RunConfig::cyclegan();
        c.optim.learning_rate = 3e-4;
        c.loss.lambda_cycle = 2.0;
        c.seed = u32::MAX as u64 + 17;
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.content_hash(), c.content_hash());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::pairwise();
        let mut b = a.clone();
        b.optim.learning_rate = 1e-4;
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }

    #[test]
    fn dotted_overrides() {
        let mut c = RunConfig::pairwise();
        c.set("optim.learning_rate", "1e-4").unwrap();
        c.set("loss.lambda_cycle", "5").unwrap();
        c.set("cyclegan.use_esa", "true").unwrap();
        c.set("name", "run-7").unwrap();
        c.set("output_dir", "out/x").unwrap();
        assert_eq!(c.optim.learning_rate, 1e-4);
        assert_eq!(c.loss.lambda_cycle, 5.0);
        assert!(c.cyclegan.use_esa);
        assert_eq!(c.name, "run-7");
        assert_eq!(c.output_dir, PathBuf::from("out/x"));
        assert!(c.set("optim.nope", "1").is_err());
        assert!(c.set("optim.batch_size", "many").is_err());
    }

    #[test]
    fn partial_files_use_defaults_and_unknown_keys_fail() {
        let c = RunConfig::from_toml("seed = 9\n[optim]\nlearning_rate = 0.001\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.optim.batch_size, 8);
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
    }
}
