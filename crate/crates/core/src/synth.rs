//! Synthetic binocular gaze with known internal-thought episodes.
//!
//! Both classes share the same fixation and saccade dynamics. Only the
//! disparity between the eyes differs: on-task gaze holds a tight
//! disparity, internal thought a larger and more variable one plus a slow
//! drift of the gaze point.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::annotate::{Label, LabeledSegment, SegmentSource};
use crate::dataset::derive_seed;
use crate::error::{Error, Result};
use crate::gaze::{write_recording, GazeFormat, GazeSample, Point2, Recording, ScreenConfig, DEFAULT_RATE_HZ};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisparityParams {
    pub mean_px: f64,
    pub sd_px: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    /// Mean fixation dwell; each dwell is uniform in `[0.5, 1.5]` times this.
    pub fixation_dwell_ms: f64,
    pub saccade_ms: f64,
    /// Per-eye positional jitter.
    pub jitter_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub class: Label,
    pub start_ms: f64,
    pub end_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub participant_id: String,
    pub seed: u64,
    pub duration_ms: f64,
    pub screen: ScreenConfig,
    pub episodes: Vec<Episode>,
    pub motion: MotionParams,
    pub on_task: DisparityParams,
    pub internal: DisparityParams,
    /// Gaze drift speed during internal thought, px/s.
    pub drift_px_s: f64,
}

impl SynthSpec {
    pub fn new(participant_id: &str, seed: u64, duration_ms: f64) -> Self {
        Self {
            participant_id: participant_id.to_string(),
            seed,
            duration_ms,
            screen: ScreenConfig::default(),
            episodes: Vec::new(),
            motion: MotionParams {
                fixation_dwell_ms: 300.0,
                saccade_ms: 33.0,
                jitter_px: 0.5,
            },
            on_task: DisparityParams { mean_px: 10.0, sd_px: 2.0 },
            internal: DisparityParams { mean_px: 20.0, sd_px: 12.0 },
            drift_px_s: 20.0,
        }
    }

    /// Back-to-back episodes of alternating class with lengths uniform in
    /// `[min_ms, max_ms]`, the first class chosen by the seed.
    pub fn alternating(mut self, min_ms: f64, max_ms: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0xe915);
        let mut internal = rng.random_bool(0.5);
        let mut t = 0.0;
        self.episodes.clear();
        while t < self.duration_ms {
            let end = (t + rng.random_range(min_ms..=max_ms)).min(self.duration_ms);
            let class = if internal { Label::InternalThought } else { Label::DeliberateOnTask };
            self.episodes.push(Episode { class, start_ms: t, end_ms: end });
            internal = !internal;
            t = end;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_ms > 0.0 && self.duration_ms.is_finite()) {
            return Err(Error::InvalidArgument("duration must be positive".into()));
        }
        let mut prev = 0.0;
        for (i, e) in self.episodes.iter().enumerate() {
            if !(e.start_ms >= prev && e.start_ms < e.end_ms && e.end_ms <= self.duration_ms) {
                return Err(Error::InvalidArgument(format!("episode {i} is out of order or out of range")));
            }
            prev = e.end_ms;
        }
        for d in [self.on_task, self.internal] {
            if !(d.sd_px >= 0.0 && d.mean_px.is_finite()) {
                return Err(Error::InvalidArgument("bad disparity parameters".into()));
            }
        }
        if !(self.motion.fixation_dwell_ms > 0.0 && self.motion.saccade_ms >= 0.0) {
            return Err(Error::InvalidArgument("bad motion parameters".into()));
        }
        Ok(())
    }

    fn class_at(&self, t: f64) -> Label {
        self.episodes
            .iter()
            .find(|e| t >= e.start_ms && t < e.end_ms)
            .map_or(Label::DeliberateOnTask, |e| e.class)
    }
}

pub fn generate(spec: &SynthSpec) -> Result<(Recording, Vec<LabeledSegment>)> {
    spec.validate()?;
    let period = 1000.0 / DEFAULT_RATE_HZ;
    let n = (spec.duration_ms / period + 1e-9).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.screen.width_px as f64, spec.screen.height_px as f64);
    let target = |rng: &mut ChaCha8Rng| {
        Point2::new(
            rng.random_range(0.15 * w..0.85 * w),
            rng.random_range(0.15 * h..0.85 * h),
        )
    };
    let normal = |d: DisparityParams| Normal::new(d.mean_px, d.sd_px).expect("validated");
    let (on, it) = (normal(spec.on_task), normal(spec.internal));
    let jitter = Normal::new(0.0, spec.motion.jitter_px).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let m = &spec.motion;

    let mut samples = Vec::with_capacity(n);
    let mut from = target(&mut rng);
    let mut to = from;
    let mut drift = Point2::default();
    let mut saccade_end = 0.0;
    let mut next_move = rng.random_range(0.5..1.5) * m.fixation_dwell_ms;
    let mut drift_dir = rng.random_range(0.0..std::f64::consts::TAU);
    for k in 0..n {
        let t = k as f64 * 1000.0 / DEFAULT_RATE_HZ;
        if t >= next_move {
            from = to;
            to = target(&mut rng);
            drift = Point2::default();
            drift_dir = rng.random_range(0.0..std::f64::consts::TAU);
            saccade_end = t + m.saccade_ms;
            next_move = saccade_end + rng.random_range(0.5..1.5) * m.fixation_dwell_ms;
        }
        let class = spec.class_at(t);
        let center = if t < saccade_end {
            from.lerp(to, 1.0 - (saccade_end - t) / m.saccade_ms)
        } else {
            Point2::new(to.x + drift.x, to.y + drift.y)
        };
        let d = match class {
            Label::InternalThought => {
                let step = spec.drift_px_s * period / 1000.0;
                drift = Point2::new(drift.x + step * drift_dir.cos(), drift.y + step * drift_dir.sin());
                it.sample(&mut rng)
            }
            _ => on.sample(&mut rng),
        };
        let left = Point2::new(center.x - d / 2.0 + jitter.sample(&mut rng), center.y + jitter.sample(&mut rng));
        let right = Point2::new(center.x + d / 2.0 + jitter.sample(&mut rng), center.y + jitter.sample(&mut rng));
        samples.push(GazeSample::binocular(t, left, right));
    }

    let mut rec = Recording::new(&spec.participant_id, spec.screen, samples);
    rec.task_tag = "synthetic".into();
    let segments = spec
        .episodes
        .iter()
        .map(|e| LabeledSegment {
            class: e.class,
            start_ms: e.start_ms,
            end_ms: e.end_ms,
            source: SegmentSource::Synthetic,
            engaged: None,
        })
        .collect();
    Ok((rec, segments))
}

/// Specs for `n` pseudo-participants `p01..`, each with its own seed and
/// alternating episodes of 6 to 12 s.
pub fn participant_specs(n: usize, seed: u64, duration_ms: f64) -> Vec<SynthSpec> {
    (1..=n)
        .map(|i| {
            let id = format!("p{i:02}");
            SynthSpec::new(&id, derive_seed(seed, &id), duration_ms).alternating(6000.0, 12_000.0)
        })
        .collect()
}

/// Gaze JSONL plus the ground-truth segments as JSON.
pub fn write_synth(rec: &Recording, segments: &[LabeledSegment], gaze: &mut dyn Write, sidecar: &mut dyn Write) -> Result<()> {
    write_recording(&rec.samples, GazeFormat::Jsonl, gaze)?;
    serde_json::to_writer_pretty(&mut *sidecar, segments)?;
    sidecar.write_all(b"\n").map_err(|e| Error::io("segments", e))?;
    Ok(())
}
