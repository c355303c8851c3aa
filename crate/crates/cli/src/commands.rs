use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use indexnet::checkpoint::Checkpoint;
use indexnet::data::{load_csv, Split, StandardizerStats, TimeSeriesDataset};
use indexnet::introspect::export_embeddings;
use indexnet::train::{ablation_run_with, evaluate, evaluate_raw, train_with, AblationResult, EpochRecord};
use indexnet::{Error, Executor, MetricsReport, TrainConfig};
use serde_json::json;

use crate::args::{EvalArgs, ExportArgs, RunArgs, SpaceArg};
use crate::manifest::{sha256_file, DataRecord, RunManifest, RunStatus, ARTIFACT_VERSION};

/// A usage problem detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// File name a preset's dataset is conventionally published under.
pub fn preset_file_name(preset: &str) -> String {
    match preset {
        "etth1" => "ETTh1.csv".into(),
        "etth2" => "ETTh2.csv".into(),
        "ettm1" => "ETTm1.csv".into(),
        "ettm2" => "ETTm2.csv".into(),
        other => format!("{other}.csv"),
    }
}

/// An explicit path wins; relative paths that do not exist fall back to the
/// data directory; with no path, the preset's file in the data directory.
pub fn resolve_data_path(given: Option<&Path>, preset: Option<&str>, data_dir: Option<&Path>) -> Result<PathBuf> {
    let not_found = |p: &Path| -> anyhow::Error {
        Error::Io {
            path: p.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not found"),
        }
        .into()
    };
    match given {
        Some(p) if p.exists() => Ok(p.to_path_buf()),
        Some(p) => match data_dir {
            Some(dir) if p.is_relative() && dir.join(p).exists() => Ok(dir.join(p)),
            _ => Err(not_found(p)),
        },
        None => {
            let (Some(preset), Some(dir)) = (preset, data_dir) else {
                bail!(UsageError(
                    "no --data given; pass --data or set INDEXNET_DATA_DIR together with a preset".into()
                ));
            };
            let p = dir.join(preset_file_name(preset));
            if p.exists() {
                Ok(p)
            } else {
                Err(not_found(&p))
            }
        }
    }
}

struct Resolved {
    config: TrainConfig,
    data: PathBuf,
    expected_sha: Option<String>,
}

fn resolve_run(args: &RunArgs) -> Result<Resolved> {
    if let Some(manifest_path) = &args.manifest {
        let m = RunManifest::load(manifest_path)?;
        let data = match &args.data {
            Some(d) => resolve_data_path(Some(d), None, args.data_dir.as_deref())?,
            None => resolve_data_path(Some(&m.data.path), None, args.data_dir.as_deref())?,
        };
        return Ok(Resolved {
            config: m.config,
            data,
            expected_sha: Some(m.data.sha256),
        });
    }
    let mut config = TrainConfig::default();
    if let Some(p) = &args.preset {
        config.apply_preset(p)?;
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        config = config
            .merge_kv(&text)
            .with_context(|| format!("in {}", path.display()))?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    let data = resolve_data_path(args.data.as_deref(), config.preset.as_deref(), args.data_dir.as_deref())?;
    if config.preset.is_none() {
        if let Some(p) = indexnet::presets::preset(&data.to_string_lossy()) {
            log::warn!(
                "{} looks like the {} dataset; pass --preset {} for its split and defaults",
                data.display(),
                p.name,
                p.name
            );
        }
    }
    Ok(Resolved {
        config,
        data,
        expected_sha: None,
    })
}

struct Prepared {
    ds: TimeSeriesDataset,
    stats: StandardizerStats,
    record: DataRecord,
}

fn prepare(resolved: &Resolved) -> Result<Prepared> {
    let sha256 = sha256_file(&resolved.data)?;
    if let Some(expected) = &resolved.expected_sha {
        if *expected != sha256 {
            return Err(Error::Dataset(format!(
                "{} has sha256 {sha256} but the manifest recorded {expected}",
                resolved.data.display()
            ))
            .into());
        }
    }
    let cfg = &resolved.config;
    let raw = load_csv(&resolved.data, cfg.freq()?, &cfg.split_spec())?;
    let stats = StandardizerStats::fit(&raw)?;
    let ds = stats.standardize(&raw)?;
    log::info!(
        "{}: {} steps × {} channels, split {:?}",
        resolved.data.display(),
        ds.len(),
        ds.n_channels(),
        ds.bounds()
    );
    Ok(Prepared {
        record: DataRecord {
            path: resolved.data.clone(),
            sha256,
            steps: ds.len(),
            channels: ds.n_channels(),
        },
        ds,
        stats,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| {
        Error::Io {
            path: dir.to_path_buf(),
            source: e,
        }
        .into()
    })
}

fn new_manifest(command: &str, cfg: &TrainConfig, workers: usize, data: &DataRecord) -> RunManifest {
    RunManifest {
        command: command.into(),
        status: RunStatus::Incomplete,
        artifact_version: ARTIFACT_VERSION.into(),
        seed: cfg.seed,
        variant_seeds: Vec::new(),
        workers,
        config: cfg.clone(),
        data: data.clone(),
        started_at: chrono::Utc::now().to_rfc3339(),
        wall_clock_s: 0.0,
        metrics: serde_json::Value::Null,
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub out: PathBuf,
    pub best_epoch: usize,
    pub val: MetricsReport,
    pub test: MetricsReport,
}

pub fn cmd_train(args: &RunArgs, workers: usize) -> Result<TrainSummary> {
    let clock = Instant::now();
    let resolved = resolve_run(args)?;
    let cfg = &resolved.config;
    let prepared = prepare(&resolved)?;
    let exec = Executor::new(workers)?;
    create_dir(&args.out)?;

    let mut manifest = new_manifest("train", cfg, workers, &prepared.record);
    manifest.save(&args.out)?;
    std::fs::write(args.out.join("config.txt"), cfg.to_kv_string())?;

    let history_path = args.out.join("history.jsonl");
    let mut history = BufWriter::new(File::create(&history_path).map_err(|e| Error::Io {
        path: history_path.clone(),
        source: e,
    })?);
    let outcome = train_with(&prepared.ds, cfg, &exec, |r: &EpochRecord| {
        let line = serde_json::to_string(r)?;
        writeln!(history, "{line}")
            .and_then(|_| history.flush())
            .map_err(|e| Error::Io {
                path: history_path.clone(),
                source: e,
            })
    })?;
    drop(history);

    let val = evaluate(&outcome.model, &prepared.ds, Split::Val, cfg.horizon, &exec)?;
    let test = evaluate(&outcome.model, &prepared.ds, Split::Test, cfg.horizon, &exec)?;
    Checkpoint::new(
        &outcome.model,
        cfg,
        &prepared.stats,
        &prepared.ds.channel_names,
        Some(outcome.best_epoch),
    )
    .save(args.out.join("checkpoint.json"))?;

    manifest.status = RunStatus::Complete;
    manifest.wall_clock_s = clock.elapsed().as_secs_f64();
    manifest.metrics = json!({
        "best_epoch": outcome.best_epoch,
        "epochs_run": outcome.history.len(),
        "val": val,
        "test": test,
    });
    manifest.save(&args.out)?;
    Ok(TrainSummary {
        out: args.out.clone(),
        best_epoch: outcome.best_epoch,
        val,
        test,
    })
}

pub fn cmd_eval(args: &EvalArgs, workers: usize) -> Result<MetricsReport> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let model = ck.to_model()?;
    let cfg = &ck.train_config;
    let horizon = args.horizon.unwrap_or(model.config.horizon);
    let path = resolve_data_path(args.data.as_deref(), cfg.preset.as_deref(), args.data_dir.as_deref())?;
    let raw = load_csv(&path, model.config.freq, &cfg.split_spec())?;
    if raw.n_channels() != ck.standardizer.n_channels() {
        return Err(Error::Dataset(format!(
            "{} has {} channels but the checkpoint was trained on {}",
            path.display(),
            raw.n_channels(),
            ck.standardizer.n_channels()
        ))
        .into());
    }
    let ds = ck.standardizer.standardize(&raw)?;
    let exec = Executor::new(workers)?;
    let report = match args.space {
        SpaceArg::Standardized => evaluate(&model, &ds, args.split, horizon, &exec)?,
        SpaceArg::Raw => evaluate_raw(&model, &ds, args.split, horizon, &ck.standardizer, &exec)?,
    };
    Ok(report)
}

pub const ABLATION_HEADER: &str = "case,te,ce,mse,mae";

/// [`cmd_ablate`] with a hook called after each finished case. An error from
/// the hook stops the run and leaves the manifest marked incomplete.
pub fn cmd_ablate_with(
    args: &RunArgs,
    workers: usize,
    mut hook: impl FnMut(&AblationResult) -> indexnet::Result<()>,
) -> Result<Vec<AblationResult>> {
    let clock = Instant::now();
    let resolved = resolve_run(args)?;
    let cfg = &resolved.config;
    let prepared = prepare(&resolved)?;
    let exec = Executor::new(workers)?;
    create_dir(&args.out)?;

    let mut manifest = new_manifest("ablate", cfg, workers, &prepared.record);
    manifest.variant_seeds = vec![cfg.seed; 4];
    manifest.metrics = json!({ "cases": [] });
    manifest.save(&args.out)?;
    std::fs::write(args.out.join("config.txt"), cfg.to_kv_string())?;

    let csv_path = args.out.join("ablation.csv");
    std::fs::write(&csv_path, format!("{ABLATION_HEADER}\n"))?;
    let mut cases = Vec::new();
    let out_dir = args.out.clone();
    let results = ablation_run_with(&prepared.ds, cfg, &exec, |r| {
        let io = |e: std::io::Error| Error::Io {
            path: csv_path.clone(),
            source: e,
        };
        let mut f = OpenOptions::new().append(true).open(&csv_path).map_err(io)?;
        writeln!(f, "{},{},{},{},{}", r.case.case, r.case.te, r.case.ce, r.test.mse, r.test.mae).map_err(io)?;
        cases.push(json!({
            "case": r.case.case,
            "te": r.case.te,
            "ce": r.case.ce,
            "seed": cfg.seed,
            "best_epoch": r.best_epoch,
            "test": r.test,
        }));
        manifest.metrics = json!({ "cases": cases });
        manifest.wall_clock_s = clock.elapsed().as_secs_f64();
        manifest
            .save(&out_dir)
            .map_err(|e| Error::Dataset(format!("writing manifest: {e:#}")))?;
        hook(r)
    })?;
    manifest.status = RunStatus::Complete;
    manifest.wall_clock_s = clock.elapsed().as_secs_f64();
    manifest.save(&args.out)?;
    Ok(results)
}

pub fn cmd_ablate(args: &RunArgs, workers: usize) -> Result<Vec<AblationResult>> {
    cmd_ablate_with(args, workers, |_| Ok(()))
}

pub fn cmd_export_embeddings(args: &ExportArgs) -> Result<Vec<PathBuf>> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let model = ck.to_model()?;
    Ok(export_embeddings(&model, &args.out)?)
}
