use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling interval in minutes. Must be a positive divisor of 60.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Freq(u32);

impl Freq {
    pub const HOURLY: Freq = Freq(60);

    pub fn new(minutes: u32) -> Result<Self> {
        if minutes == 0 || 60 % minutes != 0 {
            return Err(Error::Config(format!(
                "sampling interval {minutes} min must be a positive divisor of 60"
            )));
        }
        Ok(Self(minutes))
    }

    pub fn minutes(self) -> u32 {
        self.0
    }

    /// K = 60/τ, the number of minute slots per hour.
    pub fn steps_per_hour(self) -> usize {
        (60 / self.0) as usize
    }
}

impl TryFrom<u32> for Freq {
    type Error = Error;
    fn try_from(value: u32) -> Result<Self> {
        Freq::new(value)
    }
}

impl From<Freq> for u32 {
    fn from(f: Freq) -> u32 {
        f.0
    }
}

/// Discrete calendar fields for one step, all zero-based so they index
/// embedding tables directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CalendarFields {
    pub minute_idx: u8,
    pub hour: u8,
    pub day_of_week: u8,
    /// 0..=30; `None` when the calendar was synthesized from step indices.
    pub day_of_month: Option<u8>,
    /// 0..=11; `None` when the calendar was synthesized from step indices.
    pub month: Option<u8>,
}

impl CalendarFields {
    pub fn from_datetime(ts: &NaiveDateTime, freq: Freq) -> Self {
        Self {
            minute_idx: (ts.minute() / freq.minutes()) as u8,
            hour: ts.hour() as u8,
            day_of_week: ts.weekday().num_days_from_monday() as u8,
            day_of_month: Some(ts.day0() as u8),
            month: Some(ts.month0() as u8),
        }
    }

    pub fn has_month_fields(&self) -> bool {
        self.day_of_month.is_some() && self.month.is_some()
    }
}

/// Calendar proxy from a bare step index: hour of day and day of week derived
/// as if step 0 were Monday 00:00.
pub fn index_proxy_features(t: usize, freq: Freq) -> CalendarFields {
    let per_hour = freq.steps_per_hour();
    CalendarFields {
        minute_idx: (t % per_hour) as u8,
        hour: ((t / per_hour) % 24) as u8,
        day_of_week: ((t / (24 * per_hour)) % 7) as u8,
        day_of_month: None,
        month: None,
    }
}

const DATE_FORMATS: &[&str] = &[
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y/%m/%d %H:%M:%S",
    "%Y/%m/%d %H:%M",
];

pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    DATE_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
        .or_else(|| {
            chrono::NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
}
