//! Dataset ingestion, calendar features, global standardization and windowing.

mod calendar;
mod dataset;
mod standardize;
mod windows;

pub use calendar::{index_proxy_features, parse_timestamp, CalendarFields, Freq};
pub use dataset::{load_csv, read_csv, Split, SplitBounds, SplitSpec, TimeSeriesDataset};
pub use standardize::{StandardizerStats, STD_FLOOR};
pub use windows::{make_windows, window_starts, Window};
