//! Per-dataset defaults for the public long- and short-term benchmarks.

use serde::{Deserialize, Serialize};

/// How a named dataset is cut into train/validation/test steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitRule {
    /// Fixed step counts; the dataset may contain trailing steps that are unused.
    Fixed {
        train: usize,
        val: usize,
        test: usize,
    },
    /// `train = ⌊train·H⌋`, `test = ⌊test·H⌋`, validation takes the rest.
    Ratio { train: f64, test: f64 },
}

impl SplitRule {
    pub const DEFAULT: SplitRule = SplitRule::Ratio {
        train: 0.7,
        test: 0.2,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetPreset {
    pub name: &'static str,
    pub channels: usize,
    pub freq_minutes: u32,
    /// (train, val, test) sample counts as published for a lookback of 96.
    pub published_sizes: (usize, usize, usize),
    pub split: SplitRule,
    pub has_timestamps: bool,
    pub layers: usize,
    pub t_dim: usize,
    pub c_dim: usize,
    pub lr: f64,
    pub d_model: usize,
    pub d_ff: usize,
    pub horizon: usize,
}

const HOUR_MONTH: usize = 30 * 24;

const fn ett(
    name: &'static str,
    freq_minutes: u32,
    published_sizes: (usize, usize, usize),
    layers: usize,
    lr: f64,
) -> DatasetPreset {
    let per_month = HOUR_MONTH * (60 / freq_minutes as usize);
    DatasetPreset {
        name,
        channels: 7,
        freq_minutes,
        published_sizes,
        split: SplitRule::Fixed {
            train: 12 * per_month,
            val: 4 * per_month,
            test: 4 * per_month,
        },
        has_timestamps: true,
        layers,
        t_dim: 16,
        c_dim: 16,
        lr,
        d_model: 128,
        d_ff: 128,
        horizon: 96,
    }
}

#[allow(clippy::too_many_arguments)]
const fn custom(
    name: &'static str,
    channels: usize,
    freq_minutes: u32,
    published_sizes: (usize, usize, usize),
    has_timestamps: bool,
    layers: usize,
    dims: (usize, usize),
    lr: f64,
    model: (usize, usize),
) -> DatasetPreset {
    DatasetPreset {
        name,
        channels,
        freq_minutes,
        published_sizes,
        split: SplitRule::DEFAULT,
        has_timestamps,
        layers,
        t_dim: dims.0,
        c_dim: dims.1,
        lr,
        d_model: model.0,
        d_ff: model.1,
        horizon: 96,
    }
}

const fn pems(name: &'static str, channels: usize, published_sizes: (usize, usize, usize)) -> DatasetPreset {
    let mut p = custom(name, channels, 5, published_sizes, false, 3, (16, 16), 1e-3, (512, 512));
    p.split = SplitRule::Ratio {
        train: 0.6,
        test: 0.2,
    };
    p.horizon = 12;
    p
}

pub const PRESETS: &[DatasetPreset] = &[
    ett("etth1", 60, (8545, 2881, 2881), 3, 5e-4),
    ett("etth2", 60, (8545, 2881, 2881), 2, 5e-5),
    ett("ettm1", 15, (34465, 11521, 11521), 3, 2e-4),
    ett("ettm2", 15, (34465, 11521, 11521), 3, 2e-4),
    custom("weather", 21, 10, (36792, 5271, 10540), true, 3, (16, 16), 5e-4, (512, 512)),
    custom("solar", 137, 10, (36601, 5161, 10417), false, 2, (16, 16), 5e-4, (512, 512)),
    custom("electricity", 321, 60, (18317, 2633, 5261), true, 3, (16, 16), 1e-3, (512, 512)),
    custom("traffic", 862, 60, (12185, 1757, 3509), true, 3, (256, 256), 1e-3, (512, 1024)),
    pems("pems03", 358, (15617, 5135, 5135)),
    pems("pems04", 307, (10172, 3375, 3375)),
    pems("pems07", 883, (16911, 5622, 5622)),
    pems("pems08", 170, (10690, 3548, 265)),
];

/// Looks a preset up by name or file path, ignoring case, punctuation and the
/// extension, so `"data/ETTh1.csv"` finds `etth1`.
pub fn preset(name: &str) -> Option<&'static DatasetPreset> {
    let stem = std::path::Path::new(name)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(name);
    let key: String = stem
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    let key = match key.as_str() {
        "solarenergy" | "solaral" => "solar",
        "ecl" => "electricity",
        other => other,
    };
    PRESETS.iter().find(|p| p.name == key)
}
