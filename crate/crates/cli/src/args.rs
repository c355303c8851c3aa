use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use indexnet::data::Split;

#[derive(Debug, Parser)]
#[command(name = "indexnet", version, about = "Train, evaluate, ablate and inspect IndexNet forecasters")]
pub struct Cli {
    /// Worker threads for batch fan-out. Results do not depend on this value.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model and write checkpoint, history and manifest.
    Train(RunArgs),
    /// Score a checkpoint on one split and print the metrics as JSON.
    Eval(EvalArgs),
    /// Train the four timestamp/channel embedding variants with one seed.
    Ablate(RunArgs),
    /// Write each embedding table and its 3-component PCA projection as JSON.
    ExportEmbeddings(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV with a header row and an optional leading `date` column. Relative
    /// paths that do not exist are looked up under INDEXNET_DATA_DIR.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Dataset preset (etth1, ettm1, weather, ...) applied before the config file.
    #[arg(long)]
    pub preset: Option<String>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Replays the config and dataset recorded in an earlier run's manifest.
    #[arg(long, conflicts_with_all = ["config", "preset", "seed"])]
    pub manifest: Option<PathBuf>,
    #[arg(long, env = "INDEXNET_DATA_DIR", hide_env_values = true)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Standardized,
    Raw,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Defaults to the preset's file under INDEXNET_DATA_DIR.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// train, val or test.
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: Split,
    /// Must equal the checkpoint horizon; defaults to it.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_enum, default_value_t = SpaceArg::Standardized)]
    pub space: SpaceArg,
    #[arg(long, env = "INDEXNET_DATA_DIR", hide_env_values = true)]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory receiving one JSON file per active table.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse().map_err(|e: indexnet::Error| e.to_string())
}
