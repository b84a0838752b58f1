//! Sliding windows and the 120-value feature vector.
//!
//! Layout (see [`feature_manifest`] for names):
//!
//! * vergence and distance (17): pair disparity, focus distance, fixation
//!   pair centroid/circle distances, angles, eye-screen distance and
//!   pupillary distance
//! * fixation (13): bounding circle radii, cyclopean fixation durations,
//!   totals and the fixation/saccade duration ratio
//! * saccade (86): per-eye duration, length, velocity and angle statistics
//! * blink (4)
//!
//! Raw values only; no per-participant normalisation.

mod extract;
mod manifest;
mod window;

pub use crate::stats::{desc_stats, DescStats};
pub use extract::{
    angle_between, extract_features, extract_recording, extract_slice, EventScope, ExtractConfig, FeatureVector,
    MIN_VALID_RATIO,
};
pub use manifest::{feature_manifest, FeatureSubset, BLINK, FIXATION, N_FEATURES, SACCADE, VERGENCE};
pub use window::{generate_windows, valid_ratio, Window, WINDOW_SIZES_MS};
