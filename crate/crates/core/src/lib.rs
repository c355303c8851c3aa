//! IndexNet: a channel-independent residual-MLP forecaster whose hidden state
//! is enriched with learnable timestamp and channel-identity embeddings.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod embedding;
pub mod error;
pub mod introspect;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod parallel;
pub mod presets;
pub mod synthetic;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::{LossSpace, TrainConfig};
pub use error::{Error, Result};
pub use metrics::{compute_metrics, MetricSpace, MetricsReport};
pub use model::{IndexNet, ModelConfig};
pub use parallel::Executor;
