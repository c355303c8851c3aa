use super::calendar::CalendarFields;
use super::dataset::{Split, TimeSeriesDataset};

/// A lookback/horizon pair over a dataset. Slices borrow the dataset directly.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    ds: &'a TimeSeriesDataset,
    /// First input step.
    pub start: usize,
    pub lookback: usize,
    pub horizon: usize,
    pub start_calendar: CalendarFields,
}

impl<'a> Window<'a> {
    pub fn new(ds: &'a TimeSeriesDataset, start: usize, lookback: usize, horizon: usize) -> Self {
        assert!(start + lookback + horizon <= ds.len(), "window exceeds dataset");
        Self {
            ds,
            start,
            lookback,
            horizon,
            start_calendar: ds.calendar()[start],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.ds.n_channels()
    }

    /// Input slice of zero-based channel `n0`.
    pub fn input(&self, n0: usize) -> &'a [f64] {
        &self.ds.channel(n0)[self.start..self.start + self.lookback]
    }

    pub fn target(&self, n0: usize) -> &'a [f64] {
        let t0 = self.start + self.lookback;
        &self.ds.channel(n0)[t0..t0 + self.horizon]
    }

    pub fn target_start(&self) -> usize {
        self.start + self.lookback
    }

    /// Same window with its start calendar replaced.
    pub fn with_calendar(mut self, cal: CalendarFields) -> Self {
        self.start_calendar = cal;
        self
    }
}

/// Stride-1 windows for a split. Training windows lie entirely inside the
/// training range; validation and test windows keep their targets inside the
/// split and may take lookback context from the preceding steps.
pub fn make_windows(ds: &TimeSeriesDataset, split: Split, lookback: usize, horizon: usize) -> Vec<Window<'_>> {
    let starts = window_starts(ds, split, lookback, horizon);
    if starts.is_empty() {
        log::warn!(
            "{split} split too short for lookback {lookback} + horizon {horizon}; no windows"
        );
    }
    starts
        .map(|s| Window::new(ds, s, lookback, horizon))
        .collect()
}

pub fn window_starts(
    ds: &TimeSeriesDataset,
    split: Split,
    lookback: usize,
    horizon: usize,
) -> std::ops::Range<usize> {
    let range = ds.bounds().range(split);
    let first_target = match split {
        Split::Train => range.start + lookback,
        Split::Val | Split::Test => range.start.max(lookback),
    };
    let first = first_target - lookback;
    if range.end < horizon || first_target + horizon > range.end {
        return 0..0;
    }
    let last = range.end - horizon - lookback;
    first..last + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Freq, SplitSpec};

    fn ramp(len: usize, train_end: usize, val_end: usize) -> TimeSeriesDataset {
        let ch = vec![(0..len).map(|t| t as f64).collect(), (0..len).map(|t| -(t as f64)).collect()];
        let spec = SplitSpec {
            rule: None,
            train_end: Some(train_end),
            val_end: Some(val_end),
        };
        TimeSeriesDataset::from_channels(ch, Freq::HOURLY, &spec).unwrap()
    }

    #[test]
    fn train_count() {
        let ds = ramp(14, 10, 12);
        assert_eq!(make_windows(&ds, Split::Train, 4, 2).len(), 5);
        assert_eq!(make_windows(&ds, Split::Train, 6, 4).len(), 1);
        assert!(make_windows(&ds, Split::Train, 8, 4).is_empty());
    }

    #[test]
    fn slices_are_verbatim() {
        let ds = ramp(40, 20, 30);
        for split in [Split::Train, Split::Val, Split::Test] {
            for w in make_windows(&ds, split, 5, 3) {
                assert_eq!(w.input(0), &ds.channel(0)[w.start..w.start + 5]);
                assert_eq!(w.target(1), &ds.channel(1)[w.start + 5..w.start + 8]);
                assert_eq!(w.start_calendar, ds.calendar()[w.start]);
                assert_eq!(w.input(0)[0], w.start as f64);
            }
        }
    }

    #[test]
    fn eval_windows_take_context_but_keep_targets_inside() {
        let ds = ramp(40, 20, 30);
        let val = make_windows(&ds, Split::Val, 5, 3);
        // targets start at 20..=27
        assert_eq!(val.len(), 10 - 3 + 1);
        assert_eq!(val[0].start, 15);
        assert!(val.iter().all(|w| w.target_start() >= 20 && w.target_start() + 3 <= 30));
        let test = make_windows(&ds, Split::Test, 5, 3);
        assert_eq!(test.len(), 8);
        assert_eq!(test.last().unwrap().target_start() + 3, 40);
    }
}
