use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truth values with magnitude below this are excluded from MAPE.
pub const MAPE_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricSpace {
    /// Per-channel z-scores using training-split statistics.
    Standardized,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub mae: f64,
    /// Percent, over points with `|truth| ≥ 1e-8`.
    pub mape: f64,
    pub rmse: f64,
    pub n_points: usize,
    pub mape_skipped: usize,
    pub space: MetricSpace,
}

/// Streaming sums behind [`MetricsReport`]. Merging partial accumulators in a
/// fixed order keeps results reproducible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsAccumulator {
    sq: f64,
    abs: f64,
    ape: f64,
    n: usize,
    n_ape: usize,
}

impl MetricsAccumulator {
    #[inline]
    pub fn push(&mut self, pred: f64, truth: f64) {
        let e = truth - pred;
        self.sq += e * e;
        self.abs += e.abs();
        if truth.abs() >= MAPE_EPS {
            self.ape += (e / truth).abs();
            self.n_ape += 1;
        }
        self.n += 1;
    }

    pub fn push_slices(&mut self, pred: &[f64], truth: &[f64]) {
        debug_assert_eq!(pred.len(), truth.len());
        for (&p, &t) in pred.iter().zip(truth) {
            self.push(p, t);
        }
    }

    pub fn merge(&mut self, other: &MetricsAccumulator) {
        self.sq += other.sq;
        self.abs += other.abs;
        self.ape += other.ape;
        self.n += other.n;
        self.n_ape += other.n_ape;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn finish(&self, space: MetricSpace) -> Result<MetricsReport> {
        if self.n == 0 {
            return Err(Error::Dataset("no points to score".into()));
        }
        let n = self.n as f64;
        let mse = self.sq / n;
        Ok(MetricsReport {
            mse,
            mae: self.abs / n,
            mape: if self.n_ape == 0 {
                0.0
            } else {
                self.ape / self.n_ape as f64 * 100.0
            },
            rmse: mse.sqrt(),
            n_points: self.n,
            mape_skipped: self.n - self.n_ape,
            space,
        })
    }
}

/// Flat MSE, MAE, MAPE and RMSE over all points.
pub fn compute_metrics(pred: &[f64], truth: &[f64], space: MetricSpace) -> Result<MetricsReport> {
    if pred.len() != truth.len() {
        return Err(Error::shape("compute_metrics", truth.len(), pred.len()));
    }
    let mut acc = MetricsAccumulator::default();
    acc.push_slices(pred, truth);
    acc.finish(space)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let r = compute_metrics(&[1.0, -2.0, 3.5], &[1.0, -2.0, 3.5], MetricSpace::Raw).unwrap();
        assert_eq!((r.mse, r.mae, r.mape, r.rmse), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_cases() {
        let r = compute_metrics(&[1.0, 2.0], &[0.0, 0.0], MetricSpace::Raw).unwrap();
        assert_eq!(r.mse, 2.5);
        assert_eq!(r.mae, 1.5);
        assert_eq!(r.rmse, 2.5f64.sqrt());
        assert_eq!(r.mape_skipped, 2);

        let r = compute_metrics(&[1.0, 5.0], &[2.0, 4.0], MetricSpace::Raw).unwrap();
        assert_eq!(r.mape, 37.5);
        assert_eq!(r.mape_skipped, 0);
    }

    #[test]
    fn shape_and_empty_errors() {
        assert!(compute_metrics(&[1.0], &[1.0, 2.0], MetricSpace::Raw).is_err());
        assert!(compute_metrics(&[], &[], MetricSpace::Raw).is_err());
    }

    #[test]
    fn merge_matches_single_pass() {
        let pred: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let truth: Vec<f64> = (0..50).map(|i| (i as f64 * 0.11).cos()).collect();
        let whole = compute_metrics(&pred, &truth, MetricSpace::Standardized).unwrap();
        let mut a = MetricsAccumulator::default();
        a.push_slices(&pred[..20], &truth[..20]);
        let mut b = MetricsAccumulator::default();
        b.push_slices(&pred[20..], &truth[20..]);
        a.merge(&b);
        let merged = a.finish(MetricSpace::Standardized).unwrap();
        assert!((merged.mse - whole.mse).abs() < 1e-12);
        assert_eq!(merged.n_points, 50);
    }
}
