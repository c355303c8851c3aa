//! Training loop, evaluation and the embedding ablation matrix.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{LossSpace, TrainConfig};
use crate::data::{window_starts, Split, StandardizerStats, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::metrics::{MetricSpace, MetricsAccumulator, MetricsReport};
use crate::model::IndexNet;
use crate::numeric::{Adam, AdamConfig, ParamSet};
use crate::parallel::Executor;

/// Number of partial gradient buffers per batch. Fixed so the summation order
/// never depends on the worker count.
pub const GRAD_SHARDS: usize = 8;

/// Windows scored per evaluation work item.
const EVAL_CHUNK: usize = 64;

/// One training example: a window start and a zero-based channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Row {
    pub start: usize,
    pub n0: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches, in the loss space.
    pub train_mse: f64,
    /// Validation MSE in the standardized space.
    pub val_mse: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation MSE.
    pub model: IndexNet,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mse: f64,
}

/// Every (window, channel) row of a split, window-major.
pub fn split_rows(ds: &TimeSeriesDataset, split: Split, lookback: usize, horizon: usize) -> Vec<Row> {
    window_starts(ds, split, lookback, horizon)
        .flat_map(|start| (0..ds.n_channels()).map(move |n0| Row { start, n0 }))
        .collect()
}

fn check_compatible(model: &IndexNet, ds: &TimeSeriesDataset) -> Result<()> {
    let cfg = &model.config;
    if ds.n_channels() != cfg.n_channels {
        return Err(Error::Config(format!(
            "dataset has {} channels but the model expects {}",
            ds.n_channels(),
            cfg.n_channels
        )));
    }
    if ds.freq() != cfg.freq {
        return Err(Error::Config(format!(
            "dataset interval is {} min but the model expects {} min",
            ds.freq().minutes(),
            cfg.freq.minutes()
        )));
    }
    if cfg.te_enabled && cfg.groups.month_level && !ds.has_dates() {
        return Err(Error::Config(
            "month_level embeddings need a dataset with timestamps".into(),
        ));
    }
    Ok(())
}

/// Adds the gradient of the summed squared error over `rows` into `grads` and
/// returns that sum.
pub fn accumulate_rows(
    model: &IndexNet,
    ds: &TimeSeriesDataset,
    rows: &[Row],
    loss_space: LossSpace,
    grads: &mut IndexNet,
) -> Result<f64> {
    let (l, t) = (model.config.lookback, model.config.horizon);
    let mut sse = 0.0;
    let mut g = vec![0.0; t];
    for row in rows {
        let series = ds.channel(row.n0);
        let x = &series[row.start..row.start + l];
        let y = &series[row.start + l..row.start + l + t];
        let (_, trace) = model.forward(x, &ds.calendar()[row.start], row.n0 + 1)?;
        let s = trace.norm;
        for ((gi, &yn), &truth) in g.iter_mut().zip(&trace.y_norm).zip(y) {
            let r = match loss_space {
                LossSpace::Normalized => yn - (truth - s.mu) / s.sigma,
                LossSpace::Standardized => yn * s.sigma + s.mu - truth,
            };
            sse += r * r;
            *gi = match loss_space {
                LossSpace::Normalized => 2.0 * r,
                LossSpace::Standardized => 2.0 * r * s.sigma,
            };
        }
        model.backward(&trace, &g, grads)?;
    }
    Ok(sse)
}

struct Shard {
    grads: IndexNet,
    sse: f64,
    err: Option<Error>,
}

/// Mean loss and its gradient over a batch, fanned out over [`GRAD_SHARDS`]
/// contiguous slices and reduced in slice order.
pub fn batch_gradient(
    model: &IndexNet,
    ds: &TimeSeriesDataset,
    rows: &[Row],
    loss_space: LossSpace,
    exec: &Executor,
) -> Result<(f64, IndexNet)> {
    let mut shards: Vec<Shard> = (0..GRAD_SHARDS)
        .map(|_| Shard {
            grads: model.zeros_like(),
            sse: 0.0,
            err: None,
        })
        .collect();
    let mut total = model.zeros_like();
    let loss = batch_gradient_into(model, ds, rows, loss_space, exec, &mut shards, &mut total)?;
    Ok((loss, total))
}

fn batch_gradient_into(
    model: &IndexNet,
    ds: &TimeSeriesDataset,
    rows: &[Row],
    loss_space: LossSpace,
    exec: &Executor,
    shards: &mut [Shard],
    total: &mut IndexNet,
) -> Result<f64> {
    let per = rows.len().div_ceil(shards.len()).max(1);
    let mut work: Vec<&[Row]> = rows.chunks(per).collect();
    work.resize(shards.len(), &[]);
    exec.zip_mut(shards, &work, |shard, rows| {
        shard.grads.zero();
        shard.err = None;
        match accumulate_rows(model, ds, rows, loss_space, &mut shard.grads) {
            Ok(sse) => shard.sse = sse,
            Err(e) => shard.err = Some(e),
        }
    });
    total.zero();
    let mut sse = 0.0;
    for shard in shards.iter_mut() {
        if let Some(e) = shard.err.take() {
            return Err(e);
        }
        sse += shard.sse;
        total.accumulate(&shard.grads);
    }
    let count = (rows.len() * model.config.horizon) as f64;
    total.scale(1.0 / count);
    Ok(sse / count)
}

/// Trains on a globally standardized dataset.
pub fn train(ds: &TimeSeriesDataset, config: &TrainConfig, exec: &Executor) -> Result<TrainOutcome> {
    train_with(ds, config, exec, |_| Ok(()))
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    ds: &TimeSeriesDataset,
    config: &TrainConfig,
    exec: &Executor,
    mut on_epoch: impl FnMut(&EpochRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = IndexNet::new(config.model_config(ds.n_channels(), ds.freq()), &mut init_rng)?;
    check_compatible(&model, ds)?;

    let (l, t) = (config.lookback, config.horizon);
    let mut rows = split_rows(ds, Split::Train, l, t);
    if rows.is_empty() {
        return Err(Error::Dataset(format!(
            "train split has no windows for lookback {l} + horizon {t}"
        )));
    }
    if window_starts(ds, Split::Val, l, t).is_empty() {
        return Err(Error::Dataset(format!(
            "val split has no windows for lookback {l} + horizon {t}"
        )));
    }

    let mut adam = Adam::new(&model, AdamConfig::with_lr(config.lr));
    let mut shards: Vec<Shard> = (0..GRAD_SHARDS)
        .map(|_| Shard {
            grads: model.zeros_like(),
            sse: 0.0,
            err: None,
        })
        .collect();
    let mut total = model.zeros_like();

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, IndexNet)> = None;
    let mut stale = 0;
    let clock = Instant::now();
    for epoch in 0..config.max_epochs {
        let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed);
        order_rng.set_stream(epoch as u64 + 1);
        rows.shuffle(&mut order_rng);

        let mut weighted = 0.0;
        for (batch, chunk) in rows.chunks(config.batch_size).enumerate() {
            let loss = batch_gradient_into(
                &model,
                ds,
                chunk,
                config.loss_space,
                exec,
                &mut shards,
                &mut total,
            )?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    what: "training loss".into(),
                    epoch,
                    batch,
                });
            }
            adam.step(&mut model, &total).map_err(|e| match e {
                Error::NonFiniteGradient { block } => Error::NonFinite {
                    what: format!("gradient in {block}"),
                    epoch,
                    batch,
                },
                other => other,
            })?;
            weighted += loss * chunk.len() as f64;
        }
        let train_mse = weighted / rows.len() as f64;
        let val_mse = evaluate(&model, ds, Split::Val, t, exec)?.mse;
        if !val_mse.is_finite() {
            return Err(Error::NonFinite {
                what: "validation MSE".into(),
                epoch,
                batch: 0,
            });
        }
        let record = EpochRecord {
            epoch,
            train_mse,
            val_mse,
            elapsed_s: clock.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: train {train_mse:.6} val {val_mse:.6} ({:.1}s)",
            record.elapsed_s
        );
        on_epoch(&record)?;
        history.push(record);

        if best.as_ref().is_none_or(|(b, _, _)| val_mse < *b) {
            best = Some((val_mse, epoch, model.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                log::info!("early stop after epoch {epoch}");
                break;
            }
        }
    }
    let (best_val_mse, best_epoch, model) = best.expect("max_epochs ≥ 1");
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        best_val_mse,
    })
}

/// Scores stride-1 windows of a split in the globally standardized space.
pub fn evaluate(
    model: &IndexNet,
    ds: &TimeSeriesDataset,
    split: Split,
    horizon: usize,
    exec: &Executor,
) -> Result<MetricsReport> {
    score(model, ds, split, horizon, None, exec)
}

/// Like [`evaluate`], with predictions and targets mapped back to raw units.
pub fn evaluate_raw(
    model: &IndexNet,
    ds: &TimeSeriesDataset,
    split: Split,
    horizon: usize,
    stats: &StandardizerStats,
    exec: &Executor,
) -> Result<MetricsReport> {
    if stats.n_channels() != ds.n_channels() {
        return Err(Error::shape("standardizer channels", ds.n_channels(), stats.n_channels()));
    }
    score(model, ds, split, horizon, Some(stats), exec)
}

fn score(
    model: &IndexNet,
    ds: &TimeSeriesDataset,
    split: Split,
    horizon: usize,
    raw: Option<&StandardizerStats>,
    exec: &Executor,
) -> Result<MetricsReport> {
    let cfg = &model.config;
    if horizon != cfg.horizon {
        return Err(Error::Config(format!(
            "requested horizon {horizon} does not match the model horizon {}",
            cfg.horizon
        )));
    }
    check_compatible(model, ds)?;
    let starts: Vec<usize> = window_starts(ds, split, cfg.lookback, horizon).collect();
    if starts.is_empty() {
        return Err(Error::Dataset(format!(
            "{split} split has no windows for lookback {} + horizon {horizon}",
            cfg.lookback
        )));
    }
    let chunks: Vec<&[usize]> = starts.chunks(EVAL_CHUNK).collect();
    let partials = exec.map(&chunks, |chunk| -> Result<MetricsAccumulator> {
        let mut acc = MetricsAccumulator::default();
        for &start in chunk.iter() {
            for n0 in 0..ds.n_channels() {
                let series = ds.channel(n0);
                let x = &series[start..start + cfg.lookback];
                let y = &series[start + cfg.lookback..start + cfg.lookback + horizon];
                let (pred, _) = model.forward(x, &ds.calendar()[start], n0 + 1)?;
                match raw {
                    None => acc.push_slices(&pred, y),
                    Some(stats) => {
                        for (&p, &truth) in pred.iter().zip(y) {
                            acc.push(stats.invert_value(n0, p), stats.invert_value(n0, truth));
                        }
                    }
                }
            }
        }
        Ok(acc)
    });
    let mut acc = MetricsAccumulator::default();
    for part in partials {
        acc.merge(&part?);
    }
    acc.finish(if raw.is_some() {
        MetricSpace::Raw
    } else {
        MetricSpace::Standardized
    })
}

/// One of the four embedding configurations, numbered as in the usual
/// component ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationCase {
    pub case: u8,
    pub te: bool,
    pub ce: bool,
}

pub const ABLATION_CASES: [AblationCase; 4] = [
    AblationCase { case: 1, te: false, ce: false },
    AblationCase { case: 2, te: false, ce: true },
    AblationCase { case: 3, te: true, ce: false },
    AblationCase { case: 4, te: true, ce: true },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub case: AblationCase,
    pub test: MetricsReport,
    pub best_epoch: usize,
    pub best_val_mse: f64,
}

/// Trains all four cases with the same seed and scores each on the test split.
pub fn ablation_run(ds: &TimeSeriesDataset, config: &TrainConfig, exec: &Executor) -> Result<Vec<AblationResult>> {
    ablation_run_with(ds, config, exec, |_| Ok(()))
}

/// [`ablation_run`] reporting each case as soon as it finishes.
pub fn ablation_run_with(
    ds: &TimeSeriesDataset,
    config: &TrainConfig,
    exec: &Executor,
    mut on_case: impl FnMut(&AblationResult) -> Result<()>,
) -> Result<Vec<AblationResult>> {
    let mut out = Vec::with_capacity(4);
    for case in ABLATION_CASES {
        let cfg = TrainConfig {
            te_enabled: case.te,
            ce_enabled: case.ce,
            ..config.clone()
        };
        let outcome = train(ds, &cfg, exec)?;
        let test = evaluate(&outcome.model, ds, Split::Test, cfg.horizon, exec)?;
        let result = AblationResult {
            case,
            test,
            best_epoch: outcome.best_epoch,
            best_val_mse: outcome.best_val_mse,
        };
        on_case(&result)?;
        out.push(result);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SplitSpec;

    fn sine(len: usize) -> TimeSeriesDataset {
        let ch = (0..2)
            .map(|c| {
                (0..len)
                    .map(|t| (t as f64 * std::f64::consts::TAU / 12.0 + c as f64).sin())
                    .collect()
            })
            .collect();
        TimeSeriesDataset::from_channels(ch, crate::data::Freq::HOURLY, &SplitSpec::default()).unwrap()
    }

    fn small() -> TrainConfig {
        TrainConfig {
            lookback: 24,
            horizon: 6,
            d_model: 8,
            d_ff: 8,
            layers: 1,
            t_dim: 4,
            c_dim: 4,
            lr: 1e-2,
            batch_size: 32,
            max_epochs: 3,
            patience: 2,
            seed: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn batch_gradient_is_independent_of_workers() {
        let ds = sine(200);
        let cfg = small();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = IndexNet::new(cfg.model_config(2, ds.freq()), &mut rng).unwrap();
        let rows = split_rows(&ds, Split::Train, 24, 6);
        let seq = batch_gradient(&model, &ds, &rows[..50], cfg.loss_space, &Executor::sequential()).unwrap();
        let par = batch_gradient(&model, &ds, &rows[..50], cfg.loss_space, &Executor::new(3).unwrap()).unwrap();
        assert_eq!(seq.0, par.0);
        assert_eq!(seq.1, par.1);
    }

    #[test]
    fn history_has_one_record_per_epoch() {
        let ds = sine(300);
        let out = train(&ds, &small(), &Executor::sequential()).unwrap();
        assert!(!out.history.is_empty() && out.history.len() <= 3);
        let min = out.history.iter().map(|r| r.val_mse).fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_val_mse, min);
        assert_eq!(out.history[out.best_epoch].val_mse, min);
    }

    #[test]
    fn evaluate_rejects_mismatches() {
        let ds = sine(300);
        let cfg = small();
        let model = IndexNet::zeros(cfg.model_config(2, ds.freq())).unwrap();
        let exec = Executor::sequential();
        let err = evaluate(&model, &ds, Split::Test, 7, &exec).unwrap_err().to_string();
        assert!(err.contains('7') && err.contains('6'), "{err}");
        let other = IndexNet::zeros(cfg.model_config(3, ds.freq())).unwrap();
        assert!(evaluate(&other, &ds, Split::Test, 6, &exec).is_err());
        let tiny = sine(40);
        assert!(evaluate(&model, &tiny, Split::Val, 6, &exec).is_err());
    }

    #[test]
    fn raw_space_undoes_standardization() {
        let raw = sine(300);
        let scaled = raw
            .with_values(crate::numeric::DenseMatrix::from_vec(
                2,
                300,
                raw.values().as_slice().iter().map(|v| v * 3.0 + 10.0).collect(),
            ).unwrap())
            .unwrap();
        let stats = StandardizerStats::fit(&scaled).unwrap();
        let ds = stats.standardize(&scaled).unwrap();
        let model = IndexNet::zeros(small().model_config(2, ds.freq())).unwrap();
        let exec = Executor::sequential();
        let z = evaluate(&model, &ds, Split::Test, 6, &exec).unwrap();
        let r = evaluate_raw(&model, &ds, Split::Test, 6, &stats, &exec).unwrap();
        assert_eq!(r.space, MetricSpace::Raw);
        // a zero model's error scales with each channel's std
        let s2 = stats.std.iter().map(|s| s * s).sum::<f64>() / 2.0;
        assert!((r.mse / z.mse - s2).abs() / s2 < 0.05);
    }
}
