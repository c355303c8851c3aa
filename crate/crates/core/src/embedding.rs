//! Timestamp and channel-identity embedding tables.
//!
//! The tables are zero-initialized lookups indexed by discrete calendar fields
//! and by channel position. Retrieval sums the rows of each periodicity group
//! (`e_w` for minute/hour/day-of-week, `e_m` for day-of-month/month); backward
//! routes a gradient unchanged to every row that contributed. Nothing here
//! depends on the forecaster, so any backbone that can concatenate a vector
//! onto its hidden state can consume these tables.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{CalendarFields, Freq};
use crate::error::{Error, Result};
use crate::numeric::{axpy, DenseMatrix, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveGroups {
    pub week_level: bool,
    pub month_level: bool,
}

impl Default for ActiveGroups {
    fn default() -> Self {
        Self {
            week_level: true,
            month_level: false,
        }
    }
}

pub const HOURS: usize = 24;
pub const DAYS_OF_WEEK: usize = 7;
pub const DAYS_OF_MONTH: usize = 31;
pub const MONTHS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampTables {
    pub freq: Freq,
    pub dim: usize,
    pub groups: ActiveGroups,
    /// `K × dim` with `K = 60/τ`; absent for hourly data.
    pub minute: Option<DenseMatrix>,
    pub hour: Option<DenseMatrix>,
    pub dow: Option<DenseMatrix>,
    pub dom: Option<DenseMatrix>,
    pub month: Option<DenseMatrix>,
}

/// Table rows read by one retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SourceRows {
    pub minute: Option<usize>,
    pub hour: Option<usize>,
    pub dow: Option<usize>,
    pub dom: Option<usize>,
    pub month: Option<usize>,
    pub identity: Option<usize>,
}

impl TimestampTables {
    pub fn new(freq: Freq, dim: usize, groups: ActiveGroups) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("timestamp embedding dim must be ≥ 1".into()));
        }
        let table = |on: bool, rows: usize| on.then(|| DenseMatrix::zeros(rows, dim));
        let k = freq.steps_per_hour();
        Ok(Self {
            freq,
            dim,
            groups,
            minute: table(groups.week_level && k > 1, k),
            hour: table(groups.week_level, HOURS),
            dow: table(groups.week_level, DAYS_OF_WEEK),
            dom: table(groups.month_level, DAYS_OF_MONTH),
            month: table(groups.month_level, MONTHS),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::new(self.freq, self.dim, self.groups).expect("shape already validated")
    }

    /// Fills every active table with standard-normal entries.
    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for (_, block) in self.blocks_mut() {
            for v in block {
                *v = rng.sample(StandardNormal);
            }
        }
    }

    pub fn tables(&self) -> Vec<(&'static str, &DenseMatrix)> {
        [
            ("minute", &self.minute),
            ("hour", &self.hour),
            ("dow", &self.dow),
            ("dom", &self.dom),
            ("month", &self.month),
        ]
        .into_iter()
        .filter_map(|(n, t)| t.as_ref().map(|t| (n, t)))
        .collect()
    }

    fn tables_mut(&mut self) -> Vec<(&'static str, &mut DenseMatrix)> {
        [
            ("minute", &mut self.minute),
            ("hour", &mut self.hour),
            ("dow", &mut self.dow),
            ("dom", &mut self.dom),
            ("month", &mut self.month),
        ]
        .into_iter()
        .filter_map(|(n, t)| t.as_mut().map(|t| (n, t)))
        .collect()
    }

    /// Returns `(e_w, e_m)` and the rows that produced them.
    pub fn retrieve(&self, cal: &CalendarFields) -> Result<(Vec<f64>, Vec<f64>, SourceRows)> {
        let mut e_w = vec![0.0; self.dim];
        let mut e_m = vec![0.0; self.dim];
        let mut rows = SourceRows::default();
        let read = |table: &Option<DenseMatrix>, idx: usize, acc: &mut [f64], what: &'static str| {
            match table {
                Some(t) if idx < t.rows() => {
                    axpy(1.0, t.row(idx), acc);
                    Ok(Some(idx))
                }
                Some(t) => Err(Error::Index {
                    what,
                    index: idx + 1,
                    len: t.rows(),
                }),
                None => Ok(None),
            }
        };
        rows.minute = read(&self.minute, cal.minute_idx as usize, &mut e_w, "minute slot")?;
        rows.hour = read(&self.hour, cal.hour as usize, &mut e_w, "hour of day")?;
        rows.dow = read(&self.dow, cal.day_of_week as usize, &mut e_w, "day of week")?;
        if self.groups.month_level {
            let (Some(dom), Some(month)) = (cal.day_of_month, cal.month) else {
                return Err(Error::Config(
                    "month features unavailable: month-level embeddings need dated timestamps".into(),
                ));
            };
            rows.dom = read(&self.dom, dom as usize, &mut e_m, "day of month")?;
            rows.month = read(&self.month, month as usize, &mut e_m, "month")?;
        }
        Ok((e_w, e_m, rows))
    }

    /// Adds `grad_e_w` to each contributing week-level row and `grad_e_m` to
    /// each month-level row of `grads`.
    pub fn backward(&self, rows: &SourceRows, grad_e_w: &[f64], grad_e_m: &[f64], grads: &mut TimestampTables) {
        let add = |table: &mut Option<DenseMatrix>, row: Option<usize>, g: &[f64]| {
            if let (Some(t), Some(r)) = (table.as_mut(), row) {
                axpy(1.0, g, t.row_mut(r));
            }
        };
        add(&mut grads.minute, rows.minute, grad_e_w);
        add(&mut grads.hour, rows.hour, grad_e_w);
        add(&mut grads.dow, rows.dow, grad_e_w);
        add(&mut grads.dom, rows.dom, grad_e_m);
        add(&mut grads.month, rows.month, grad_e_m);
    }

    pub fn num_params(&self) -> usize {
        self.tables().iter().map(|(_, t)| t.as_slice().len()).sum()
    }
}

impl ParamSet for TimestampTables {
    fn blocks(&self) -> Vec<(String, &[f64])> {
        self.tables()
            .into_iter()
            .map(|(n, t)| (format!("te.{n}"), t.as_slice()))
            .collect()
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        self.tables_mut()
            .into_iter()
            .map(|(n, t)| (format!("te.{n}"), t.as_mut_slice()))
            .collect()
    }
}

/// `N × dim` channel identity table; channel `n` (1-based) reads row `n − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTable {
    pub table: DenseMatrix,
}

impl ChannelTable {
    pub fn new(n_channels: usize, dim: usize) -> Result<Self> {
        if n_channels == 0 || dim == 0 {
            return Err(Error::Config("channel table needs N ≥ 1 and dim ≥ 1".into()));
        }
        Ok(Self {
            table: DenseMatrix::zeros(n_channels, dim),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            table: DenseMatrix::zeros(self.table.rows(), self.table.cols()),
        }
    }

    pub fn n_channels(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn identity_index(n: usize) -> usize {
        n - 1
    }

    pub fn retrieve(&self, n: usize) -> Result<&[f64]> {
        if n == 0 || n > self.n_channels() {
            return Err(Error::Index {
                what: "channel",
                index: n,
                len: self.n_channels(),
            });
        }
        Ok(self.table.row(Self::identity_index(n)))
    }

    pub fn backward(&self, row: usize, grad: &[f64], grads: &mut ChannelTable) {
        axpy(1.0, grad, grads.table.row_mut(row));
    }
}

impl ParamSet for ChannelTable {
    fn blocks(&self) -> Vec<(String, &[f64])> {
        vec![("ce.identity".into(), self.table.as_slice())]
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![("ce.identity".into(), self.table.as_mut_slice())]
    }
}

/// Vectors retrieved for one (window, channel) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexVectors {
    pub e_w: Vec<f64>,
    pub e_m: Vec<f64>,
    pub e_identity: Vec<f64>,
    pub source: SourceRows,
}

impl IndexVectors {
    /// `e_w + e_m`, the slice concatenated after the projected input.
    pub fn timestamp_sum(&self) -> Vec<f64> {
        self.e_w.iter().zip(&self.e_m).map(|(a, b)| a + b).collect()
    }
}

/// The combined timestamp and channel embedding, either part optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEmbedding {
    pub timestamp: Option<TimestampTables>,
    pub channel: Option<ChannelTable>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub freq: Freq,
    pub n_channels: usize,
    /// `None` disables the timestamp tables.
    pub t_dim: Option<usize>,
    /// `None` disables the channel table.
    pub c_dim: Option<usize>,
    pub groups: ActiveGroups,
}

impl IndexEmbedding {
    pub fn build(spec: &EmbeddingSpec) -> Result<Self> {
        Ok(Self {
            timestamp: spec
                .t_dim
                .map(|d| TimestampTables::new(spec.freq, d, spec.groups))
                .transpose()?,
            channel: spec
                .c_dim
                .map(|d| ChannelTable::new(spec.n_channels, d))
                .transpose()?,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            timestamp: self.timestamp.as_ref().map(TimestampTables::zeros_like),
            channel: self.channel.as_ref().map(ChannelTable::zeros_like),
        }
    }

    pub fn t_dim(&self) -> usize {
        self.timestamp.as_ref().map_or(0, |t| t.dim)
    }

    pub fn c_dim(&self) -> usize {
        self.channel.as_ref().map_or(0, ChannelTable::dim)
    }

    /// Width appended to a backbone's hidden vector.
    pub fn output_dim(&self) -> usize {
        self.t_dim() + self.c_dim()
    }

    /// Retrieves the vectors for 1-based channel `n` in a window starting at `cal`.
    pub fn retrieve(&self, cal: &CalendarFields, n: usize) -> Result<IndexVectors> {
        let (e_w, e_m, mut source) = match &self.timestamp {
            Some(t) => t.retrieve(cal)?,
            None => (Vec::new(), Vec::new(), SourceRows::default()),
        };
        let e_identity = match &self.channel {
            Some(c) => {
                let row = c.retrieve(n)?.to_vec();
                source.identity = Some(ChannelTable::identity_index(n));
                row
            }
            None => Vec::new(),
        };
        Ok(IndexVectors {
            e_w,
            e_m,
            e_identity,
            source,
        })
    }

    /// Writes `[e_w + e_m, e_identity]` (active parts only) into `out`.
    pub fn write_concat(&self, v: &IndexVectors, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.output_dim());
        let t = self.t_dim();
        for (o, (a, b)) in out[..t].iter_mut().zip(v.e_w.iter().zip(&v.e_m)) {
            *o = a + b;
        }
        out[t..].copy_from_slice(&v.e_identity);
    }

    /// Routes gradients to the rows listed in `source`.
    pub fn backward(
        &self,
        source: &SourceRows,
        grad_e_w: &[f64],
        grad_e_m: &[f64],
        grad_identity: &[f64],
        grads: &mut IndexEmbedding,
    ) {
        if let (Some(t), Some(gt)) = (&self.timestamp, grads.timestamp.as_mut()) {
            t.backward(source, grad_e_w, grad_e_m, gt);
        }
        if let (Some(c), Some(gc), Some(row)) = (&self.channel, grads.channel.as_mut(), source.identity) {
            c.backward(row, grad_identity, gc);
        }
    }

    /// Backward from the gradient of the concatenated slice written by
    /// [`write_concat`](Self::write_concat).
    pub fn backward_concat(&self, source: &SourceRows, grad_slice: &[f64], grads: &mut IndexEmbedding) {
        let t = self.t_dim();
        let g_t = &grad_slice[..t];
        self.backward(source, g_t, g_t, &grad_slice[t..], grads);
    }

    pub fn num_params(&self) -> usize {
        self.timestamp.as_ref().map_or(0, TimestampTables::num_params)
            + self.channel.as_ref().map_or(0, |c| c.table.as_slice().len())
    }
}

impl ParamSet for IndexEmbedding {
    fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = self.timestamp.as_ref().map(ParamSet::blocks).unwrap_or_default();
        if let Some(c) = &self.channel {
            out.extend(c.blocks());
        }
        out
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = self.timestamp.as_mut().map(ParamSet::blocks_mut).unwrap_or_default();
        if let Some(c) = &mut self.channel {
            out.extend(c.blocks_mut());
        }
        out
    }
}
