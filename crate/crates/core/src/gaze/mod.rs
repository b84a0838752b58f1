//! Binocular gaze samples, recordings and their preprocessing.
//!
//! Screen coordinates are pixels with the origin at the top-left corner,
//! x to the right and y down. Angles reported anywhere in the crate are
//! converted to the mathematical convention (y up) first.

mod filter;
mod io;
mod resample;

pub use filter::{one_euro_filter, GazeSmoother, OneEuro, OneEuroParams};
pub use io::{parse_recording, parse_sample_line, read_screen_config, write_recording, GazeFormat, Ingested};
pub use resample::{resample, MAX_BRIDGE_GAP_MS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RATE_HZ: f64 = 60.0;

/// A point on the screen, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// A 3-D eye position in millimetres. `z` is the perpendicular distance
/// from the screen plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(self, other: Point3) -> f64 {
        let (dx, dy, dz) = (other.x - self.x, other.y - self.y, other.z - self.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn lerp(self, other: Point3, t: f64) -> Point3 {
        Point3::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
            self.z + (other.z - self.z) * t,
        )
    }

    pub(crate) fn from_array(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }

    pub(crate) fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Physical description of the display.
///
/// The pixel pitch (mm per pixel) converts on-screen disparity into world
/// units for the focus displacement model. The default is a 1680x1050 panel
/// with a 0.283 mm pitch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenConfig {
    pub width_px: u32,
    pub height_px: u32,
    pub width_mm: f64,
    pub height_mm: f64,
}

impl ScreenConfig {
    pub fn new(width_px: u32, height_px: u32, width_mm: f64, height_mm: f64) -> Result<Self> {
        let cfg = Self {
            width_px,
            height_px,
            width_mm,
            height_mm,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::Screen("pixel dimensions must be positive".into()));
        }
        if !(self.width_mm > 0.0 && self.height_mm > 0.0) {
            return Err(Error::Screen("physical dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn pixel_pitch_mm(&self) -> f64 {
        self.width_mm / self.width_px as f64
    }
}

impl Default for ScreenConfig {
    fn default() -> Self {
        Self {
            width_px: 1680,
            height_px: 1050,
            width_mm: 0.283 * 1680.0,
            height_mm: 0.283 * 1050.0,
        }
    }
}

/// One timestamped binocular observation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GazeSample {
    pub t_ms: f64,
    pub left_px: Option<Point2>,
    pub right_px: Option<Point2>,
    pub left_valid: bool,
    pub right_valid: bool,
    pub left_eye_mm: Option<Point3>,
    pub right_eye_mm: Option<Point3>,
}

impl GazeSample {
    /// A sample with both eyes valid and no eye positions.
    pub fn binocular(t_ms: f64, left: Point2, right: Point2) -> Self {
        Self {
            t_ms,
            left_px: Some(left),
            right_px: Some(right),
            left_valid: true,
            right_valid: true,
            left_eye_mm: None,
            right_eye_mm: None,
        }
    }

    /// A sample where neither eye was tracked.
    pub fn lost(t_ms: f64) -> Self {
        Self {
            t_ms,
            ..Default::default()
        }
    }

    pub fn left(&self) -> Option<Point2> {
        if self.left_valid {
            self.left_px
        } else {
            None
        }
    }

    pub fn right(&self) -> Option<Point2> {
        if self.right_valid {
            self.right_px
        } else {
            None
        }
    }

    pub fn pair(&self) -> Option<(Point2, Point2)> {
        Some((self.left()?, self.right()?))
    }

    pub fn both_valid(&self) -> bool {
        self.left().is_some() && self.right().is_some()
    }

    pub fn both_invalid(&self) -> bool {
        self.left().is_none() && self.right().is_none()
    }

    pub fn eye(&self, eye: Eye) -> Option<Point2> {
        match eye {
            Eye::Left => self.left(),
            Eye::Right => self.right(),
            Eye::Cyclopean => match (self.left(), self.right()) {
                (Some(l), Some(r)) => Some(l.midpoint(r)),
                (l, r) => l.or(r),
            },
        }
    }
}

/// Which gaze signal an operation looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eye {
    Left,
    Right,
    /// Midpoint of both eyes, or the single valid eye when only one is tracked.
    Cyclopean,
}

/// A gaze recording for one participant and task.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub participant_id: String,
    pub task_tag: String,
    pub screen: ScreenConfig,
    pub samples: Vec<GazeSample>,
    pub nominal_rate_hz: f64,
}

impl Recording {
    pub fn new(participant_id: impl Into<String>, screen: ScreenConfig, samples: Vec<GazeSample>) -> Self {
        Self {
            participant_id: participant_id.into(),
            task_tag: String::new(),
            screen,
            samples,
            nominal_rate_hz: DEFAULT_RATE_HZ,
        }
    }

    pub fn period_ms(&self) -> f64 {
        1000.0 / self.nominal_rate_hz
    }

    /// Time covered by the samples, counting each sample as one period long.
    pub fn span_ms(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t_ms - a.t_ms + self.period_ms(),
            _ => 0.0,
        }
    }

    pub fn start_ms(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.t_ms)
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }
}
