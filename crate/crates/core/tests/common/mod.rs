#![allow(dead_code)]

use indexnet::data::{read_csv, Freq, SplitSpec, TimeSeriesDataset};
use indexnet::embedding::ActiveGroups;
use indexnet::model::{InitMode, ModelConfig};

/// The small configuration used for exhaustive gradient checks.
pub fn toy_config() -> ModelConfig {
    ModelConfig {
        lookback: 8,
        horizon: 4,
        d_model: 6,
        d_ff: 6,
        layers: 2,
        t_dim: 3,
        c_dim: 3,
        te_enabled: true,
        ce_enabled: true,
        groups: ActiveGroups {
            week_level: true,
            month_level: true,
        },
        freq: Freq::new(15).unwrap(),
        n_channels: 2,
        init_mode: InitMode::Random,
    }
}

/// Two 15-minute channels with real timestamps crossing a month boundary.
pub fn dated_toy_dataset(steps: usize) -> TimeSeriesDataset {
    let start = chrono::NaiveDate::from_ymd_opt(2021, 3, 31)
        .unwrap()
        .and_hms_opt(20, 0, 0)
        .unwrap();
    let mut csv = String::from("date,a,b\n");
    for t in 0..steps {
        let ts = start + chrono::Duration::minutes(15 * t as i64);
        let a = (t as f64 * 0.3).sin() + 0.01 * t as f64;
        let b = (t as f64 * 0.17).cos() * 2.0 - 0.5;
        csv.push_str(&format!("{},{a},{b}\n", ts.format("%Y-%m-%d %H:%M:%S")));
    }
    read_csv(csv.as_bytes(), Freq::new(15).unwrap(), &SplitSpec::default()).unwrap()
}
