//! Four-case embedding ablation on the generated calendar dataset.
//!
//! ```text
//! cargo run --release -p indexnet-core --example synthetic_ablation -- [seed]
//! ```

use indexnet::data::StandardizerStats;
use indexnet::synthetic::{calendar_dataset, CalendarSpec};
use indexnet::train::ablation_run;
use indexnet::{Executor, TrainConfig};

fn main() -> indexnet::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let raw = calendar_dataset(&CalendarSpec::standard(280, seed))?;
    let ds = StandardizerStats::fit(&raw)?.standardize(&raw)?;
    let config = TrainConfig {
        lookback: 48,
        horizon: 24,
        d_model: 32,
        d_ff: 32,
        layers: 2,
        t_dim: 8,
        c_dim: 8,
        lr: 1e-3,
        batch_size: 128,
        max_epochs: 15,
        patience: 3,
        seed,
        ..TrainConfig::default()
    };
    let start = std::time::Instant::now();
    for r in ablation_run(&ds, &config, &Executor::sequential())? {
        println!(
            "case {} te={} ce={} mse={:.5} mae={:.5} best_epoch={}",
            r.case.case, r.case.te, r.case.ce, r.test.mse, r.test.mae, r.best_epoch
        );
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
