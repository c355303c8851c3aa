use std::io::Read;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::calendar::{index_proxy_features, parse_timestamp, CalendarFields, Freq};
use crate::error::{Error, Result};
use crate::numeric::DenseMatrix;
use crate::presets::SplitRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!(
                "unknown split {other:?} (expected train, val or test)"
            ))),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// Step indices delimiting `[0, train_end)`, `[train_end, val_end)` and
/// `[val_end, test_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBounds {
    pub train_end: usize,
    pub val_end: usize,
    pub test_end: usize,
}

/// How to derive [`SplitBounds`] for a dataset of a given length.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitSpec {
    pub rule: Option<SplitRule>,
    pub train_end: Option<usize>,
    pub val_end: Option<usize>,
}

impl SplitBounds {
    pub fn resolve(len: usize, spec: &SplitSpec) -> Result<Self> {
        let rule = spec.rule.unwrap_or(SplitRule::DEFAULT);
        let mut bounds = match rule {
            SplitRule::Fixed { train, val, test } => {
                if train + val + test > len {
                    return Err(Error::Dataset(format!(
                        "dataset has {len} steps but the split needs {}",
                        train + val + test
                    )));
                }
                SplitBounds {
                    train_end: train,
                    val_end: train + val,
                    test_end: train + val + test,
                }
            }
            SplitRule::Ratio { train, test } => {
                let n_train = (len as f64 * train) as usize;
                let n_test = (len as f64 * test) as usize;
                SplitBounds {
                    train_end: n_train,
                    val_end: len - n_test,
                    test_end: len,
                }
            }
        };
        if let Some(t) = spec.train_end {
            bounds.train_end = t;
        }
        if let Some(v) = spec.val_end {
            bounds.val_end = v;
        }
        if spec.train_end.is_some() || spec.val_end.is_some() {
            bounds.test_end = bounds.test_end.max(bounds.val_end + 1).min(len);
        }
        bounds.validate(len)?;
        Ok(bounds)
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        let SplitBounds {
            train_end,
            val_end,
            test_end,
        } = *self;
        if !(0 < train_end && train_end < val_end && val_end < test_end && test_end <= len) {
            return Err(Error::Dataset(format!(
                "invalid split bounds train_end={train_end} val_end={val_end} test_end={test_end} for {len} steps"
            )));
        }
        Ok(())
    }

    pub fn range(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => 0..self.train_end,
            Split::Val => self.train_end..self.val_end,
            Split::Test => self.val_end..self.test_end,
        }
    }
}

/// A multivariate series with per-step calendar fields.
///
/// Values are stored channel-major (`N × H`) so each channel's history is a
/// contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub name: Option<String>,
    pub channel_names: Vec<String>,
    values: DenseMatrix,
    calendar: Vec<CalendarFields>,
    freq: Freq,
    bounds: SplitBounds,
    has_dates: bool,
}

impl TimeSeriesDataset {
    pub fn new(
        channel_names: Vec<String>,
        values: DenseMatrix,
        calendar: Vec<CalendarFields>,
        freq: Freq,
        bounds: SplitBounds,
        has_dates: bool,
    ) -> Result<Self> {
        if values.rows() != channel_names.len() {
            return Err(Error::shape("dataset channels", channel_names.len(), values.rows()));
        }
        if values.rows() == 0 {
            return Err(Error::Dataset("dataset has no channels".into()));
        }
        if calendar.len() != values.cols() {
            return Err(Error::shape("calendar length", values.cols(), calendar.len()));
        }
        bounds.validate(values.cols())?;
        Ok(Self {
            name: None,
            channel_names,
            values,
            calendar,
            freq,
            bounds,
            has_dates,
        })
    }

    /// Builds a dataset from channel-major rows, generating the calendar from
    /// step indices.
    pub fn from_channels(
        channels: Vec<Vec<f64>>,
        freq: Freq,
        split: &SplitSpec,
    ) -> Result<Self> {
        let values = DenseMatrix::from_rows(&channels)?;
        let len = values.cols();
        let calendar = (0..len).map(|t| index_proxy_features(t, freq)).collect();
        let names = (0..values.rows()).map(|i| format!("ch{}", i + 1)).collect();
        let bounds = SplitBounds::resolve(len, split)?;
        Self::new(names, values, calendar, freq, bounds, false)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn len(&self) -> usize {
        self.values.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.values.rows()
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn channel(&self, n0: usize) -> &[f64] {
        self.values.row(n0)
    }

    pub fn calendar(&self) -> &[CalendarFields] {
        &self.calendar
    }

    pub fn freq(&self) -> Freq {
        self.freq
    }

    pub fn bounds(&self) -> SplitBounds {
        self.bounds
    }

    pub fn has_dates(&self) -> bool {
        self.has_dates
    }

    pub fn with_bounds(mut self, bounds: SplitBounds) -> Result<Self> {
        bounds.validate(self.len())?;
        self.bounds = bounds;
        Ok(self)
    }

    pub fn with_values(&self, values: DenseMatrix) -> Result<Self> {
        if values.rows() != self.values.rows() || values.cols() != self.values.cols() {
            return Err(Error::shape(
                "dataset values",
                self.values.as_slice().len(),
                values.as_slice().len(),
            ));
        }
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    /// Reorders channels; `order[i]` is the source channel of output channel `i`.
    pub fn permute_channels(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_channels() {
            return Err(Error::shape("channel permutation", self.n_channels(), order.len()));
        }
        let rows: Vec<Vec<f64>> = order.iter().map(|&i| self.channel(i).to_vec()).collect();
        let names = order.iter().map(|&i| self.channel_names[i].clone()).collect();
        Ok(Self {
            values: DenseMatrix::from_rows(&rows)?,
            channel_names: names,
            ..self.clone()
        })
    }
}

/// Reads a CSV file with a header row and an optional leading `date` column.
pub fn load_csv(path: impl AsRef<Path>, freq: Freq, split: &SplitSpec) -> Result<TimeSeriesDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_stem().and_then(|s| s.to_str()).map(str::to_string);
    let ds = read_csv(file, freq, split)?;
    Ok(match name {
        Some(n) => ds.with_name(n),
        None => ds,
    })
}

/// Same as [`load_csv`] over any reader. Row numbers in errors are 1-based
/// file lines (the header is line 1).
pub fn read_csv<R: Read>(reader: R, freq: Freq, split: &SplitSpec) -> Result<TimeSeriesDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Data {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Data {
            row: 1,
            message: "empty file: no header row".into(),
        });
    }
    let has_dates = headers[0].eq_ignore_ascii_case("date");
    let first_value_col = usize::from(has_dates);
    let channel_names: Vec<String> = headers.iter().skip(first_value_col).map(str::to_string).collect();
    if channel_names.is_empty() {
        return Err(Error::Data {
            row: 1,
            message: "no value columns".into(),
        });
    }

    let n = channel_names.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut calendar = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Data {
            row,
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Data {
                row,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        if has_dates {
            let ts = parse_timestamp(&record[0]).ok_or_else(|| Error::Data {
                row,
                message: format!("unparseable date {:?}", &record[0]),
            })?;
            calendar.push(CalendarFields::from_datetime(&ts, freq));
        }
        for (c, field) in record.iter().skip(first_value_col).enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Data {
                row,
                message: format!("unparseable number {field:?} in column {:?}", channel_names[c]),
            })?;
            columns[c].push(v);
        }
    }
    let len = columns[0].len();
    if len == 0 {
        return Err(Error::Data {
            row: 2,
            message: "file has a header but no data rows".into(),
        });
    }
    if !has_dates {
        calendar = (0..len).map(|t| index_proxy_features(t, freq)).collect();
    }
    let values = DenseMatrix::from_rows(&columns)?;
    let bounds = SplitBounds::resolve(len, split)?;
    TimeSeriesDataset::new(channel_names, values, calendar, freq, bounds, has_dates)
}
