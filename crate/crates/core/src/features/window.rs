use std::ops::Range;

use serde::Serialize;

use crate::gaze::{GazeSample, Recording};

const EPS: f64 = 1e-6;

/// The window sizes compared in evaluation, in ms.
pub const WINDOW_SIZES_MS: [f64; 4] = [250.0, 500.0, 750.0, 1000.0];

/// A sliding window over a recording. `sample_range` indexes the recording
/// samples with `start_ms <= t < end_ms`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Window {
    pub start_ms: f64,
    pub end_ms: f64,
    pub size_ms: f64,
    pub sample_range: Range<usize>,
    /// Fraction of samples with both eyes valid.
    pub valid_ratio: f64,
}

impl Window {
    /// Window covering exactly `samples`, assuming one period per sample.
    pub fn over(samples: &[GazeSample], period_ms: f64) -> Self {
        let start = samples.first().map_or(0.0, |s| s.t_ms);
        let size = samples.len() as f64 * period_ms;
        Self {
            start_ms: start,
            end_ms: start + size,
            size_ms: size,
            sample_range: 0..samples.len(),
            valid_ratio: valid_ratio(samples),
        }
    }

    pub fn contains(&self, t_ms: f64) -> bool {
        t_ms >= self.start_ms - EPS && t_ms < self.end_ms - EPS
    }
}

pub fn valid_ratio(samples: &[GazeSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|s| s.both_valid()).count() as f64 / samples.len() as f64
}

/// Windows of `size_ms` starting at `t0 + k * step_ms` for every `k` that
/// keeps the window within the recording span (each sample counts as one
/// sampling period).
pub fn generate_windows(rec: &Recording, size_ms: f64, step_ms: f64) -> Vec<Window> {
    assert!(size_ms > 0.0 && step_ms > 0.0, "window size and step must be positive");
    let span = rec.span_ms();
    if rec.is_empty() || span < size_ms - EPS {
        return Vec::new();
    }
    let count = ((span - size_ms) / step_ms + EPS).floor() as usize + 1;
    let t0 = rec.start_ms();
    let times: Vec<f64> = rec.samples.iter().map(|s| s.t_ms).collect();
    (0..count)
        .map(|k| {
            let start = t0 + k as f64 * step_ms;
            let end = start + size_ms;
            let lo = times.partition_point(|&t| t < start - EPS);
            let hi = times.partition_point(|&t| t < end - EPS);
            Window {
                start_ms: start,
                end_ms: end,
                size_ms,
                sample_range: lo..hi,
                valid_ratio: valid_ratio(&rec.samples[lo..hi]),
            }
        })
        .collect()
}
