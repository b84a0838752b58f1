//! Detection of internal thought from binocular eye vergence.
//!
//! The pipeline resamples and smooths raw binocular gaze, segments
//! oculomotor events, extracts a 120-value feature vector per sliding
//! window and classifies windows with a random forest. The annotation
//! module turns blur/deblur event logs into labelled segments, and the
//! realtime module runs the classifier frame by frame.

pub mod annotate;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod forest;
pub mod gaze;
pub mod oculomotor;
pub mod pipeline;
pub mod realtime;
pub mod stats;
pub mod synth;
pub mod vergence;

pub use error::{Error, Result};
