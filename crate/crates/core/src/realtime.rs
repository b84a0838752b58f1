//! Frame-by-frame classification with the sustained-positive alert rule.
//!
//! Each frame is labelled by classifying the one-second window that ends
//! at it. An alert fires once the most recent 60 frame labels are all
//! internal thought, then the engine stays quiet for a cooldown.

use std::collections::VecDeque;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{extract_recording, extract_slice, feature_manifest, ExtractConfig};
use crate::forest::{Classifier, Prediction, POSITIVE_CLASS};
use crate::gaze::{GazeSample, GazeSmoother, OneEuroParams, Recording};

pub const WINDOW_FRAMES: usize = 60;
pub const COOLDOWN_MS: f64 = 5000.0;
pub const ALERT_MS: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EngineConfig {
    pub window_frames: usize,
    pub cooldown_ms: f64,
    pub alert_ms: f64,
    pub extract: ExtractConfig,
    /// Smoothing applied to incoming frames; `None` for pre-filtered input.
    pub filter: Option<OneEuroParams>,
}

impl EngineConfig {
    pub fn new(extract: ExtractConfig) -> Self {
        Self {
            window_frames: WINDOW_FRAMES,
            cooldown_ms: COOLDOWN_MS,
            alert_ms: ALERT_MS,
            extract,
            filter: Some(OneEuroParams::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlertEvent {
    pub kind: &'static str,
    pub t_ms: f64,
    pub score: f64,
    pub window_start_ms: f64,
    pub window_end_ms: f64,
    pub alert_duration_ms: f64,
}

impl AlertEvent {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("alert serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameResult {
    pub t_ms: f64,
    /// `None` until the buffer holds a full window.
    pub prediction: Option<Prediction>,
    pub alert: Option<AlertEvent>,
}

pub struct Engine {
    classifier: Arc<dyn Classifier>,
    columns: Vec<usize>,
    config: EngineConfig,
    smoother: Option<GazeSmoother>,
    frames: VecDeque<GazeSample>,
    positives: VecDeque<bool>,
    cooldown_until_ms: f64,
    last_t_ms: Option<f64>,
    dropped: usize,
}

impl Engine {
    /// `feature_names` are the classifier's inputs, taken by name from the
    /// full feature vector.
    pub fn new(classifier: Arc<dyn Classifier>, feature_names: &[String], config: EngineConfig) -> Result<Self> {
        if config.window_frames == 0 {
            return Err(Error::InvalidArgument("window must hold at least one frame".into()));
        }
        let manifest = feature_manifest();
        let columns = feature_names
            .iter()
            .map(|n| {
                manifest
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown feature {n:?}")))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            classifier,
            columns,
            config,
            smoother: config.filter.map(GazeSmoother::new),
            frames: VecDeque::with_capacity(config.window_frames),
            positives: VecDeque::with_capacity(config.window_frames),
            cooldown_until_ms: f64::NEG_INFINITY,
            last_t_ms: None,
            dropped: 0,
        })
    }

    /// Frames that arrived late or duplicated and were ignored.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Process one frame; `None` when it was dropped as out of order.
    pub fn push_frame(&mut self, sample: GazeSample) -> Result<Option<FrameResult>> {
        if self.last_t_ms.is_some_and(|t| sample.t_ms <= t) || !sample.t_ms.is_finite() {
            self.dropped += 1;
            return Ok(None);
        }
        self.last_t_ms = Some(sample.t_ms);
        let sample = match &mut self.smoother {
            Some(s) => s.push(&sample),
            None => sample,
        };
        let n = self.config.window_frames;
        if self.frames.len() == n {
            self.frames.pop_front();
        }
        self.frames.push_back(sample);
        let now = sample.t_ms;
        if self.frames.len() < n {
            return Ok(Some(FrameResult {
                t_ms: now,
                prediction: None,
                alert: None,
            }));
        }

        let window = self.frames.make_contiguous();
        let fv = extract_slice(window, &self.config.extract);
        let x: Vec<f64> = self.columns.iter().map(|&c| fv.values[c]).collect();
        let prediction = self.classifier.predict(&x)?;

        if self.positives.len() == n {
            self.positives.pop_front();
        }
        self.positives.push_back(prediction.label == POSITIVE_CLASS);
        let alert = (self.positives.len() == n && self.positives.iter().all(|&p| p) && now >= self.cooldown_until_ms)
            .then(|| {
                self.cooldown_until_ms = now + self.config.cooldown_ms;
                AlertEvent {
                    kind: "alert",
                    t_ms: now,
                    score: prediction.score,
                    window_start_ms: fv.window.start_ms,
                    window_end_ms: fv.window.end_ms,
                    alert_duration_ms: self.config.alert_ms,
                }
            });
        Ok(Some(FrameResult {
            t_ms: now,
            prediction: Some(prediction),
            alert,
        }))
    }
}

/// Batch counterpart of the engine: one prediction per window of
/// `window_frames` samples stepped by one frame over a filtered recording.
pub fn batch_frame_labels(
    classifier: &dyn Classifier,
    feature_names: &[String],
    rec: &Recording,
    config: &ExtractConfig,
    window_frames: usize,
) -> Result<Vec<Prediction>> {
    let manifest = feature_manifest();
    let columns: Vec<usize> = feature_names
        .iter()
        .map(|n| manifest.iter().position(|m| m == n).ok_or_else(|| Error::InvalidArgument(format!("unknown feature {n:?}"))))
        .collect::<Result<_>>()?;
    let size = window_frames as f64 * config.period_ms;
    extract_recording(rec, size, config.period_ms, config)
        .iter()
        .map(|fv| classifier.predict(&columns.iter().map(|&c| fv.values[c]).collect::<Vec<_>>()))
        .collect()
}

/// Frames of a recording paced at `speed` times real time; `speed <= 0`
/// replays without waiting.
pub struct Replay<'a> {
    samples: std::slice::Iter<'a, GazeSample>,
    speed: f64,
    origin: Option<(Instant, f64)>,
}

pub fn replay(rec: &Recording, speed: f64) -> Replay<'_> {
    Replay {
        samples: rec.samples.iter(),
        speed,
        origin: None,
    }
}

impl Iterator for Replay<'_> {
    type Item = GazeSample;

    fn next(&mut self) -> Option<GazeSample> {
        let s = *self.samples.next()?;
        if self.speed > 0.0 {
            let (start, t0) = *self.origin.get_or_insert((Instant::now(), s.t_ms));
            let due = start + Duration::from_secs_f64(((s.t_ms - t0) / self.speed / 1000.0).max(0.0));
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
        }
        Some(s)
    }
}
