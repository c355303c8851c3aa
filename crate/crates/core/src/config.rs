//! Training configuration and its flat `key = value` file format.
//!
//! ```text
//! # comments and blank lines are ignored
//! preset = etth1        # applied first, wherever it appears
//! lookback = 96
//! te_enabled = true
//! ```

use serde::{Deserialize, Serialize};

use crate::data::{Freq, SplitSpec};
use crate::embedding::ActiveGroups;
use crate::error::{Error, Result};
use crate::model::{InitMode, ModelConfig};
use crate::presets::{preset, DatasetPreset};

/// Space in which the training loss is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossSpace {
    /// Targets z-scored with the input window's statistics.
    #[default]
    Normalized,
    /// Targets in the globally standardized space the metrics use.
    Standardized,
}

impl std::str::FromStr for LossSpace {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(LossSpace::Normalized),
            "standardized" => Ok(LossSpace::Standardized),
            other => Err(Error::Config(format!(
                "loss_space must be normalized or standardized, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Preset the defaults came from, if any. Also selects the split rule.
    pub preset: Option<String>,
    pub lookback: usize,
    pub horizon: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub layers: usize,
    pub t_dim: usize,
    pub c_dim: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub te_enabled: bool,
    pub ce_enabled: bool,
    pub week_level: bool,
    pub month_level: bool,
    pub init_mode: InitMode,
    pub loss_space: LossSpace,
    /// Sampling interval; defaults to the preset's, else hourly.
    pub freq_minutes: Option<u32>,
    pub train_end: Option<usize>,
    pub val_end: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            preset: None,
            lookback: 96,
            horizon: 96,
            d_model: 128,
            d_ff: 128,
            layers: 3,
            t_dim: 16,
            c_dim: 16,
            lr: 5e-4,
            batch_size: 256,
            max_epochs: 30,
            patience: 3,
            seed: 2024,
            te_enabled: true,
            ce_enabled: true,
            week_level: true,
            month_level: false,
            init_mode: InitMode::Zeros,
            loss_space: LossSpace::Normalized,
            freq_minutes: None,
            train_end: None,
            val_end: None,
        }
    }
}

/// Keys accepted by [`TrainConfig::parse`], in documentation order.
pub const CONFIG_KEYS: &[&str] = &[
    "preset",
    "lookback",
    "horizon",
    "d_model",
    "d_ff",
    "layers",
    "t_dim",
    "c_dim",
    "lr",
    "batch_size",
    "max_epochs",
    "patience",
    "seed",
    "te_enabled",
    "ce_enabled",
    "week_level",
    "month_level",
    "init_mode",
    "loss_space",
    "freq_minutes",
    "train_end",
    "val_end",
];

impl TrainConfig {
    pub fn for_preset(name: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_preset(name)?;
        Ok(cfg)
    }

    /// Overwrites the architecture and optimizer fields with a preset's values.
    pub fn apply_preset(&mut self, name: &str) -> Result<()> {
        let p = preset(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown preset {name:?}; known: {}",
                crate::presets::PRESETS
                    .iter()
                    .map(|p| p.name)
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })?;
        self.preset = Some(p.name.to_string());
        self.horizon = p.horizon;
        self.d_model = p.d_model;
        self.d_ff = p.d_ff;
        self.layers = p.layers;
        self.t_dim = p.t_dim;
        self.c_dim = p.c_dim;
        self.lr = p.lr;
        self.freq_minutes = Some(p.freq_minutes);
        Ok(())
    }

    pub fn preset_info(&self) -> Option<&'static DatasetPreset> {
        self.preset.as_deref().and_then(preset)
    }

    pub fn freq(&self) -> Result<Freq> {
        Freq::new(self.freq_minutes.unwrap_or(60))
    }

    pub fn groups(&self) -> ActiveGroups {
        ActiveGroups {
            week_level: self.week_level,
            month_level: self.month_level,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            rule: self.preset_info().map(|p| p.split),
            train_end: self.train_end,
            val_end: self.val_end,
        }
    }

    pub fn model_config(&self, n_channels: usize, freq: Freq) -> ModelConfig {
        ModelConfig {
            lookback: self.lookback,
            horizon: self.horizon,
            d_model: self.d_model,
            d_ff: self.d_ff,
            layers: self.layers,
            t_dim: self.t_dim,
            c_dim: self.c_dim,
            te_enabled: self.te_enabled,
            ce_enabled: self.ce_enabled,
            groups: self.groups(),
            freq,
            n_channels,
            init_mode: self.init_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be ≥ 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be ≥ 1".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("lr must be finite and ≥ 0, got {}", self.lr)));
        }
        if self.te_enabled && !self.week_level && !self.month_level {
            return Err(Error::Config(
                "te_enabled needs week_level or month_level".into(),
            ));
        }
        self.freq()?;
        Ok(())
    }

    /// Parses the flat config format on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        Self::default().merge_kv(text)
    }

    /// Applies `key = value` lines on top of `self`. A `preset` line is applied
    /// before the other keys. Every unknown key is reported at once.
    pub fn merge_kv(self, text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut unknown = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got {line:?}", i + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !CONFIG_KEYS.contains(&key) {
                unknown.push(key.to_string());
            }
            pairs.push((i + 1, key, value));
        }
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "unknown config key(s): {}",
                unknown.join(", ")
            )));
        }
        let mut cfg = self;
        if let Some((_, _, name)) = pairs.iter().rev().find(|(_, k, _)| *k == "preset") {
            cfg.apply_preset(name)?;
        }
        for (line, key, value) in pairs {
            if key != "preset" {
                cfg.set(key, value)
                    .map_err(|e| Error::Config(format!("line {line}: {e}")))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
            }
        }
        fn opt<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>> {
            if v == "none" || v.is_empty() {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        match key {
            "preset" => self.apply_preset(value)?,
            "lookback" => self.lookback = num(key, value)?,
            "horizon" => self.horizon = num(key, value)?,
            "d_model" => self.d_model = num(key, value)?,
            "d_ff" => self.d_ff = num(key, value)?,
            "layers" => self.layers = num(key, value)?,
            "t_dim" => self.t_dim = num(key, value)?,
            "c_dim" => self.c_dim = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "te_enabled" => self.te_enabled = flag(key, value)?,
            "ce_enabled" => self.ce_enabled = flag(key, value)?,
            "week_level" => self.week_level = flag(key, value)?,
            "month_level" => self.month_level = flag(key, value)?,
            "init_mode" => self.init_mode = value.parse()?,
            "loss_space" => self.loss_space = value.parse()?,
            "freq_minutes" => self.freq_minutes = opt(key, value)?,
            "train_end" => self.train_end = opt(key, value)?,
            "val_end" => self.val_end = opt(key, value)?,
            other => return Err(Error::Config(format!("unknown config key(s): {other}"))),
        }
        Ok(())
    }

    /// Renders every key in the format [`TrainConfig::parse`] reads.
    pub fn to_kv_string(&self) -> String {
        fn o<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
        }
        let init = match self.init_mode {
            InitMode::Zeros => "zeros",
            InitMode::Random => "random",
        };
        let loss = match self.loss_space {
            LossSpace::Normalized => "normalized",
            LossSpace::Standardized => "standardized",
        };
        let mut out = String::new();
        if let Some(p) = &self.preset {
            out.push_str(&format!("preset = {p}\n"));
        }
        let rows: [(&str, String); 21] = [
            ("lookback", self.lookback.to_string()),
            ("horizon", self.horizon.to_string()),
            ("d_model", self.d_model.to_string()),
            ("d_ff", self.d_ff.to_string()),
            ("layers", self.layers.to_string()),
            ("t_dim", self.t_dim.to_string()),
            ("c_dim", self.c_dim.to_string()),
            ("lr", format!("{:e}", self.lr)),
            ("batch_size", self.batch_size.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("seed", self.seed.to_string()),
            ("te_enabled", self.te_enabled.to_string()),
            ("ce_enabled", self.ce_enabled.to_string()),
            ("week_level", self.week_level.to_string()),
            ("month_level", self.month_level.to_string()),
            ("init_mode", init.to_string()),
            ("loss_space", loss.to_string()),
            ("freq_minutes", o(&self.freq_minutes)),
            ("train_end", o(&self.train_end)),
            ("val_end", o(&self.val_end)),
        ];
        for (k, v) in rows {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
