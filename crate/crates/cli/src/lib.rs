//! Command-line front end: `train`, `eval`, `ablate`, `export-embeddings`.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 data/IO/checkpoint
//! error, 4 numeric failure during training.

pub mod args;
pub mod commands;
pub mod manifest;

use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<indexnet::Error>() {
            if e.is_numeric_error() {
                return EXIT_NUMERIC;
            }
            if e.is_data_error() {
                return EXIT_DATA;
            }
            return EXIT_USAGE;
        }
        if cause.downcast_ref::<commands::UsageError>().is_some() {
            return EXIT_USAGE;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_DATA;
        }
    }
    EXIT_USAGE
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Train(a) => {
            let s = commands::cmd_train(a, cli.workers)?;
            println!("best epoch: {}", s.best_epoch);
            println!("final val MSE: {:.6}", s.val.mse);
            println!("test MSE: {:.6}  MAE: {:.6}", s.test.mse, s.test.mae);
            println!("wrote {}", s.out.display());
        }
        Command::Eval(a) => {
            let report = commands::cmd_eval(a, cli.workers)?;
            println!("{}", serde_json::to_string(&report)?);
        }
        Command::Ablate(a) => {
            let results = commands::cmd_ablate(a, cli.workers)?;
            println!("{}", commands::ABLATION_HEADER);
            for r in &results {
                println!("{},{},{},{:.6},{:.6}", r.case.case, r.case.te, r.case.ce, r.test.mse, r.test.mae);
            }
        }
        Command::ExportEmbeddings(a) => {
            for p in commands::cmd_export_embeddings(a)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}
