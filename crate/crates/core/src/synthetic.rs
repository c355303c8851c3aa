//! Generated datasets with known structure, for tests, benches and demos.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Freq, SplitSpec, TimeSeriesDataset};
use crate::error::{Error, Result};

fn gaussian(std: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, std).map_err(|e| Error::Config(format!("noise std {std}: {e}")))
}

/// `sin(2πt/period + c)` per channel `c`, plus white noise.
pub fn sine_dataset(n_channels: usize, len: usize, period: f64, noise: f64, seed: u64) -> Result<TimeSeriesDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = gaussian(noise)?;
    let channels = (0..n_channels)
        .map(|c| {
            (0..len)
                .map(|t| (t as f64 * std::f64::consts::TAU / period + c as f64).sin() + dist.sample(&mut rng))
                .collect()
        })
        .collect();
    TimeSeriesDataset::from_channels(channels, Freq::HOURLY, &SplitSpec::default())
}

/// Zero-mean Gaussian noise with standard deviation `std`.
pub fn white_noise(n_channels: usize, len: usize, std: f64, seed: u64) -> Result<TimeSeriesDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = gaussian(std)?;
    let channels = (0..n_channels)
        .map(|_| (0..len).map(|_| dist.sample(&mut rng)).collect())
        .collect();
    TimeSeriesDataset::from_channels(channels, Freq::HOURLY, &SplitSpec::default())
}

/// How one generated channel departs from the shared daily profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelProfile {
    /// Multiplier on the daily cycle on Saturdays and Sundays.
    pub weekend_gain: f64,
    /// Linear drift per step.
    pub slope: f64,
    /// Channels with equal profiles and streams are identical.
    pub noise_stream: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalendarSpec {
    pub days: usize,
    pub noise: f64,
    pub seed: u64,
    pub channels: Vec<ChannelProfile>,
}

impl CalendarSpec {
    /// Four channels: weekends that damp or amplify the daily cycle, and
    /// rising or falling drifts.
    pub fn standard(days: usize, seed: u64) -> Self {
        let gains = [0.3, 1.7, 0.3, 1.7];
        let slopes = [0.004, 0.004, -0.004, -0.004];
        Self {
            days,
            noise: 0.25,
            seed,
            channels: gains
                .iter()
                .zip(slopes)
                .enumerate()
                .map(|(i, (&weekend_gain, slope))| ChannelProfile {
                    weekend_gain,
                    slope,
                    noise_stream: i as u64,
                })
                .collect(),
        }
    }
}

/// Shape of the shared daily cycle at hour `h`.
pub fn daily_profile(h: usize) -> f64 {
    let x = h as f64 * std::f64::consts::TAU / 24.0;
    x.sin() + 0.5 * (2.0 * x + 1.0).sin()
}

/// Hourly series with a daily cycle, channel-specific weekend behaviour and
/// drift. Step 0 is a Monday at midnight, matching the index calendar proxy.
pub fn calendar_dataset(spec: &CalendarSpec) -> Result<TimeSeriesDataset> {
    let len = spec.days * 24;
    let dist = gaussian(spec.noise)?;
    let channels = spec
        .channels
        .iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(p.noise_stream);
            (0..len)
                .map(|t| {
                    let (day, hour) = (t / 24, t % 24);
                    let gain = if day % 7 >= 5 { p.weekend_gain } else { 1.0 };
                    gain * daily_profile(hour) + p.slope * t as f64 + dist.sample(&mut rng)
                })
                .collect()
        })
        .collect();
    TimeSeriesDataset::from_channels(channels, Freq::HOURLY, &SplitSpec::default())
}
