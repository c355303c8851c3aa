use serde::{Deserialize, Serialize};

use super::dataset::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::numeric::DenseMatrix;

pub const STD_FLOOR: f64 = 1e-8;

/// Per-channel mean and population standard deviation of the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizerStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels whose standard deviation was clamped to [`STD_FLOOR`].
    #[serde(default)]
    pub clamped: Vec<usize>,
}

impl StandardizerStats {
    /// Fits on steps `< train_end` only.
    pub fn fit(ds: &TimeSeriesDataset) -> Result<Self> {
        let train_end = ds.bounds().train_end;
        if train_end == 0 {
            return Err(Error::Dataset("training split is empty".into()));
        }
        let mut mean = Vec::with_capacity(ds.n_channels());
        let mut std = Vec::with_capacity(ds.n_channels());
        let mut clamped = Vec::new();
        for n in 0..ds.n_channels() {
            let xs = &ds.channel(n)[..train_end];
            let mu = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / xs.len() as f64;
            let mut sd = var.sqrt();
            if sd < STD_FLOOR {
                log::warn!(
                    "channel {} ({}) has zero variance on the training split; std clamped to {STD_FLOOR}",
                    n + 1,
                    ds.channel_names[n]
                );
                sd = STD_FLOOR;
                clamped.push(n);
            }
            mean.push(mu);
            std.push(sd);
        }
        Ok(Self { mean, std, clamped })
    }

    pub fn n_channels(&self) -> usize {
        self.mean.len()
    }

    /// `(x − mean) / std` per channel row.
    pub fn apply(&self, values: &DenseMatrix) -> Result<DenseMatrix> {
        self.map(values, |x, mu, sd| (x - mu) / sd)
    }

    pub fn invert(&self, values: &DenseMatrix) -> Result<DenseMatrix> {
        self.map(values, |z, mu, sd| z * sd + mu)
    }

    pub fn invert_value(&self, channel: usize, z: f64) -> f64 {
        z * self.std[channel] + self.mean[channel]
    }

    fn map(&self, values: &DenseMatrix, f: impl Fn(f64, f64, f64) -> f64) -> Result<DenseMatrix> {
        if values.rows() != self.n_channels() {
            return Err(Error::shape("standardizer channels", self.n_channels(), values.rows()));
        }
        let mut out = values.clone();
        for n in 0..values.rows() {
            let (mu, sd) = (self.mean[n], self.std[n]);
            for v in out.row_mut(n) {
                *v = f(*v, mu, sd);
            }
        }
        Ok(out)
    }

    pub fn standardize(&self, ds: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
        ds.with_values(self.apply(ds.values())?)
    }
}
