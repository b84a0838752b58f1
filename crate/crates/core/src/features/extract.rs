use serde::{Deserialize, Serialize};

use super::manifest::{FeatureSubset, N_FEATURES};
use super::window::{generate_windows, Window};
use crate::gaze::{GazeSample, Recording};
use crate::oculomotor::{EventParams, Interval, OculomotorEvents, Saccade};
use crate::stats::{desc_stats, mean, sample_sd};
use crate::vergence::{eye_geometry, fixation_vergence, pair_stats, GeometryConfig};

/// Windows whose fraction of binocular samples falls below this are flagged.
pub const MIN_VALID_RATIO: f64 = 0.5;

const HORIZONTAL_DEG: f64 = 30.0;

/// Where oculomotor events are detected before features are computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventScope {
    /// Only from the window's own samples. Causal, and what the streaming
    /// engine does.
    #[default]
    Window,
    /// Once over the whole recording, then clipped to each window.
    Recording,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtractConfig {
    pub geometry: GeometryConfig,
    pub events: EventParams,
    pub period_ms: f64,
    pub scope: EventScope,
}

impl ExtractConfig {
    pub fn for_recording(rec: &Recording) -> Self {
        Self {
            geometry: GeometryConfig::for_screen(&rec.screen),
            events: EventParams::default(),
            period_ms: rec.period_ms(),
            scope: EventScope::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureVector {
    pub window: Window,
    pub values: Vec<f64>,
}

impl FeatureVector {
    /// Too few binocular samples; callers drop these windows.
    pub fn is_flagged(&self) -> bool {
        self.window.valid_ratio < MIN_VALID_RATIO
    }

    pub fn subset(&self, subset: FeatureSubset) -> Vec<f64> {
        subset.select(&self.values)
    }
}

/// Compute the 120 features of one window.
///
/// `window_samples` are the samples inside the window. `events` were
/// detected on `event_samples` (the window itself or the whole recording).
/// An event counts toward per-event statistics and counts when its midpoint
/// lies in the window; totals use the overlap of every event with the
/// window.
pub fn extract_features(
    window: &Window,
    window_samples: &[GazeSample],
    events: &OculomotorEvents,
    event_samples: &[GazeSample],
    config: &ExtractConfig,
) -> FeatureVector {
    let (ws, we) = (window.start_ms, window.end_ms);
    let member = |iv: Interval| window.contains(iv.midpoint());
    let clipped = |ivs: &mut dyn Iterator<Item = Interval>| ivs.map(|iv| iv.overlap(ws, we)).sum::<f64>();

    let mut v = Vec::with_capacity(N_FEATURES);

    // vergence and distance
    let ps = pair_stats(window_samples, &config.geometry);
    let pairs: Vec<_> = events
        .pairs
        .iter()
        .map(|&(l, r)| (&events.left_fixations[l], &events.right_fixations[r]))
        .filter(|(l, r)| {
            let both = Interval {
                start_ms: l.start_ms.max(r.start_ms),
                end_ms: l.end_ms.min(r.end_ms),
            };
            member(both)
        })
        .map(|(l, r)| fixation_vergence(l, r, event_samples))
        .collect();
    let col = |f: fn(&crate::vergence::FixationVergence) -> f64| pairs.iter().map(f).collect::<Vec<f64>>();
    let centroid_dist = col(|p| p.centroid_dist_px);
    let center_dist = col(|p| p.circle_center_dist_px);
    let normalized = col(|p| p.normalized_center_dist);
    let geo = eye_geometry(window_samples, &config.geometry);
    v.extend([
        ps.disparity_mean_px,
        ps.disparity_sd_px,
        ps.focus_dist_mean_mm,
        ps.focus_dist_sd_mm,
        mean(&centroid_dist),
        sample_sd(&centroid_dist),
        mean(&center_dist),
        sample_sd(&center_dist),
        mean(&normalized),
        sample_sd(&normalized),
        ps.angle_mean_deg,
        ps.angle_sd_deg,
        mean(&col(|p| p.centroid_angle_deg)),
        mean(&col(|p| p.center_angle_deg)),
        geo.eye_distance_mean_mm,
        geo.pd_mean_mm,
        geo.pd_sd_mm,
    ]);

    // fixation
    let fix_durations: Vec<f64> = events
        .cyclopean_fixations
        .iter()
        .filter(|f| member(f.interval()))
        .map(|f| f.duration())
        .collect();
    let fix_total = clipped(&mut events.cyclopean_fixations.iter().map(|f| f.interval()));
    let sacc_total = |s: &[Saccade]| clipped(&mut s.iter().map(|s| s.interval()));
    let (left_total, right_total) = (sacc_total(&events.left_saccades), sacc_total(&events.right_saccades));
    let sacc_mean_total = (left_total + right_total) / 2.0;
    v.push(mean(&col(|p| p.left_radius_px)));
    v.push(mean(&col(|p| p.right_radius_px)));
    v.extend(desc_stats(&fix_durations).to_array());
    v.push(fix_total);
    v.push(fix_durations.len() as f64);
    v.push(if sacc_mean_total > 0.0 { fix_total / sacc_mean_total } else { 0.0 });

    // saccades, per eye
    let per_eye = [
        saccade_block(&events.left_saccades, &member),
        saccade_block(&events.right_saccades, &member),
    ];
    for b in &per_eye {
        v.extend(desc_stats(&b.durations).to_array());
        v.extend(desc_stats(&b.lengths).to_array());
        v.extend(desc_stats(&b.velocities).to_array());
    }
    for (b, total) in per_eye.iter().zip([left_total, right_total]) {
        v.push(total);
        v.push(b.durations.len() as f64);
    }
    for b in &per_eye {
        v.extend(desc_stats(&b.angles).to_array());
        v.extend(desc_stats(&b.angles_prev).to_array());
    }
    for b in &per_eye {
        let horizontal = b.angles.iter().filter(|a| a.abs() <= HORIZONTAL_DEG).count();
        v.push(if b.angles.is_empty() { 0.0 } else { horizontal as f64 / b.angles.len() as f64 });
    }

    // blinks
    let blink_durations: Vec<f64> = events
        .blinks
        .iter()
        .filter(|b| member(**b))
        .map(|b| b.duration())
        .collect();
    v.push(mean(&blink_durations));
    v.push(sample_sd(&blink_durations));
    v.push(clipped(&mut events.blinks.iter().copied()));
    v.push(blink_durations.len() as f64);

    debug_assert_eq!(v.len(), N_FEATURES);
    FeatureVector {
        window: window.clone(),
        values: v,
    }
}

#[derive(Default)]
struct SaccadeBlock {
    durations: Vec<f64>,
    lengths: Vec<f64>,
    velocities: Vec<f64>,
    angles: Vec<f64>,
    angles_prev: Vec<f64>,
}

fn saccade_block(saccades: &[Saccade], member: &dyn Fn(Interval) -> bool) -> SaccadeBlock {
    let mut b = SaccadeBlock::default();
    for (i, s) in saccades.iter().enumerate() {
        if !member(s.interval()) {
            continue;
        }
        b.durations.push(s.duration());
        b.lengths.push(s.length_px);
        b.velocities.push(s.velocity_px_s);
        b.angles.push(s.angle_deg);
        if let Some(prev) = i.checked_sub(1).map(|j| &saccades[j]) {
            b.angles_prev.push(angle_between(prev.angle_deg, s.angle_deg));
        }
    }
    b
}

/// Unsigned angle between two directions, in `[0, 180]`.
pub fn angle_between(a_deg: f64, b_deg: f64) -> f64 {
    let d = (a_deg - b_deg).rem_euclid(360.0);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Features of a bare run of samples, detecting events on those samples
/// only. This is the per-frame path of the streaming engine.
pub fn extract_slice(samples: &[GazeSample], config: &ExtractConfig) -> FeatureVector {
    let window = Window::over(samples, config.period_ms);
    let events = OculomotorEvents::detect(samples, config.period_ms, &config.events);
    extract_features(&window, samples, &events, samples, config)
}

/// Features for every window of a recording.
pub fn extract_recording(rec: &Recording, size_ms: f64, step_ms: f64, config: &ExtractConfig) -> Vec<FeatureVector> {
    let windows = generate_windows(rec, size_ms, step_ms);
    let whole = match config.scope {
        EventScope::Recording => Some(OculomotorEvents::detect(&rec.samples, config.period_ms, &config.events)),
        EventScope::Window => None,
    };
    windows
        .iter()
        .map(|w| {
            let samples = &rec.samples[w.sample_range.clone()];
            match &whole {
                Some(events) => extract_features(w, samples, events, &rec.samples, config),
                // same arithmetic as the streaming engine, which only sees samples
                None => FeatureVector {
                    window: w.clone(),
                    ..extract_slice(samples, config)
                },
            }
        })
        .collect()
}
