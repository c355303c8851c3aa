//! Self-describing JSON checkpoints.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::data::StandardizerStats;
use crate::error::{Error, Result};
use crate::model::{IndexNet, ModelConfig};
use crate::numeric::ParamSet;

pub const CHECKPOINT_FORMAT: &str = "indexnet-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub train_config: TrainConfig,
    pub model_config: ModelConfig,
    pub standardizer: StandardizerStats,
    pub channel_names: Vec<String>,
    pub best_epoch: Option<usize>,
    /// Parameter blocks in [`ParamSet`] order.
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn new(
        model: &IndexNet,
        train_config: &TrainConfig,
        standardizer: &StandardizerStats,
        channel_names: &[String],
        best_epoch: Option<usize>,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            train_config: train_config.clone(),
            model_config: model.config,
            standardizer: standardizer.clone(),
            channel_names: channel_names.to_vec(),
            best_epoch,
            tensors: model
                .blocks()
                .into_iter()
                .map(|(name, data)| NamedTensor {
                    name,
                    data: data.to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuilds the model, checking every block name and length.
    pub fn to_model(&self) -> Result<IndexNet> {
        let mut model = IndexNet::zeros(self.model_config)
            .map_err(|e| Error::Checkpoint(format!("stored model config is invalid: {e}")))?;
        let mut blocks = model.blocks_mut();
        if blocks.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter blocks, found {}",
                blocks.len(),
                self.tensors.len()
            )));
        }
        for ((name, dst), t) in blocks.iter_mut().zip(&self.tensors) {
            if *name != t.name {
                return Err(Error::Checkpoint(format!(
                    "expected block {name}, found {}",
                    t.name
                )));
            }
            if dst.len() != t.data.len() {
                return Err(Error::Checkpoint(format!(
                    "block {name}: expected {} values, found {}",
                    dst.len(),
                    t.data.len()
                )));
            }
            dst.copy_from_slice(&t.data);
        }
        let stats = &self.standardizer;
        if stats.n_channels() != self.model_config.n_channels || stats.std.len() != stats.mean.len() {
            return Err(Error::Checkpoint(format!(
                "standardizer has {} channels but the model has {}",
                self.standardizer.n_channels(),
                self.model_config.n_channels
            )));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses a checkpoint, reporting format and version problems before
    /// anything else.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("not a JSON document: {e}")))?;
        let format = value.get("format").and_then(|v| v.as_str());
        if format != Some(CHECKPOINT_FORMAT) {
            return Err(Error::Checkpoint(format!(
                "expected format {CHECKPOINT_FORMAT:?}, found {}",
                format.map_or("none".to_string(), |f| format!("{f:?}"))
            )));
        }
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(CHECKPOINT_VERSION as u64) {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}, expected {CHECKPOINT_VERSION}",
                version.map_or("none".to_string(), |v| v.to_string())
            )));
        }
        serde_json::from_value(value).map_err(|e| Error::Checkpoint(format!("malformed checkpoint: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> (Checkpoint, IndexNet) {
        let cfg = TrainConfig {
            lookback: 8,
            horizon: 4,
            d_model: 5,
            d_ff: 6,
            layers: 2,
            t_dim: 3,
            c_dim: 2,
            ..TrainConfig::default()
        };
        let model = IndexNet::new(
            cfg.model_config(2, crate::data::Freq::HOURLY),
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        let stats = StandardizerStats {
            mean: vec![0.1, 0.2],
            std: vec![1.0, 2.0],
            clamped: vec![],
        };
        let names = vec!["a".to_string(), "b".to_string()];
        (Checkpoint::new(&model, &cfg, &stats, &names, Some(3)), model)
    }

    #[test]
    fn round_trip_is_exact() {
        let (ck, model) = sample();
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_model().unwrap(), model);
    }

    #[test]
    fn format_and_version_are_checked() {
        let err = Checkpoint::from_json("{\"hello\": 1}").unwrap_err().to_string();
        assert!(err.contains("format"), "{err}");
        let (ck, _) = sample();
        let mut v: serde_json::Value = serde_json::from_str(&ck.to_json().unwrap()).unwrap();
        v["version"] = 99.into();
        let err = Checkpoint::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
        assert!(Checkpoint::from_json("not json").is_err());
    }

    #[test]
    fn tampered_tensors_are_rejected() {
        let (mut ck, _) = sample();
        ck.tensors[0].data.pop();
        assert!(ck.to_model().is_err());
        let (mut ck, _) = sample();
        ck.tensors[1].name = "wrong".into();
        assert!(ck.to_model().is_err());
        let (mut ck, _) = sample();
        ck.tensors.pop();
        assert!(ck.to_model().is_err());
    }
}
