//! Vergence geometry: binocular disparity, minimal enclosing circles and the
//! planar visual-focus displacement model.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{GazeSample, Point2, ScreenConfig};
use crate::oculomotor::{screen_angle_deg, Fixation};
use crate::stats::{mean, sample_sd};

/// Constants of the displacement model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    /// Millimetres per pixel on the display.
    pub pitch_mm: f64,
    /// Eye-to-screen distance used when samples carry no eye positions.
    pub default_eye_distance_mm: f64,
    /// Pupillary distance used when samples carry no eye positions.
    pub default_pd_mm: f64,
}

impl GeometryConfig {
    pub fn for_screen(screen: &ScreenConfig) -> Self {
        Self {
            pitch_mm: screen.pixel_pitch_mm(),
            ..Self::default()
        }
    }

    /// Eye-to-screen distance and pupillary distance for one sample.
    fn eye_distances(&self, s: &GazeSample) -> (f64, f64) {
        match (s.left_eye_mm, s.right_eye_mm) {
            (Some(l), Some(r)) => ((l.z + r.z) / 2.0, l.distance(r)),
            _ => (self.default_eye_distance_mm, self.default_pd_mm),
        }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            pitch_mm: 0.283,
            default_eye_distance_mm: 600.0,
            default_pd_mm: 63.0,
        }
    }
}

/// Displacement of the visual focus from the screen plane, in mm.
///
/// `E` is the on-screen disparity converted to millimetres. When the left
/// eye's gaze lies left of the right eye's the axes diverge and the focus
/// sits behind the screen (`d = E*D/(PD-E)`, positive); otherwise they
/// converge in front of it (`d = -E*D/(PD+E)`). Divergence with `E >= PD`
/// has no finite intersection and saturates at `10*D`.
pub fn focus_displacement(left: Point2, right: Point2, eye_distance_mm: f64, pd_mm: f64, pitch_mm: f64) -> f64 {
    let e = pitch_mm * left.distance(right);
    if e == 0.0 {
        return 0.0;
    }
    if left.x < right.x {
        if e >= pd_mm {
            10.0 * eye_distance_mm
        } else {
            e * eye_distance_mm / (pd_mm - e)
        }
    } else {
        -e * eye_distance_mm / (pd_mm + e)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct VergenceSampleStats {
    pub disparity_mean_px: f64,
    pub disparity_sd_px: f64,
    pub angle_mean_deg: f64,
    pub angle_sd_deg: f64,
    pub focus_dist_mean_mm: f64,
    pub focus_dist_sd_mm: f64,
    pub n_pairs: usize,
}

/// Statistics over every sample where both eyes are valid.
///
/// Angles are the direction of the left-to-right vector (y up) averaged
/// arithmetically in `[-180, 180)`.
pub fn pair_stats(samples: &[GazeSample], config: &GeometryConfig) -> VergenceSampleStats {
    let n = samples.iter().filter(|s| s.both_valid()).count();
    let mut disparity = Vec::with_capacity(n);
    let mut angle = Vec::with_capacity(n);
    let mut focus = Vec::with_capacity(n);
    for s in samples {
        let Some((l, r)) = s.pair() else { continue };
        let (d, pd) = config.eye_distances(s);
        disparity.push(l.distance(r));
        angle.push(screen_angle_deg(l, r));
        focus.push(focus_displacement(l, r, d, pd, config.pitch_mm));
    }
    VergenceSampleStats {
        disparity_mean_px: mean(&disparity),
        disparity_sd_px: sample_sd(&disparity),
        angle_mean_deg: mean(&angle),
        angle_sd_deg: sample_sd(&angle),
        focus_dist_mean_mm: mean(&focus),
        focus_dist_sd_mm: sample_sd(&focus),
        n_pairs: disparity.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnclosingCircle {
    pub center_px: Point2,
    pub radius_px: f64,
}

impl EnclosingCircle {
    pub fn contains(&self, p: Point2) -> bool {
        self.center_px.distance(p) <= self.radius_px * (1.0 + 1e-12) + 1e-9
    }

    fn diameter(a: Point2, b: Point2) -> Self {
        Self {
            center_px: a.midpoint(b),
            radius_px: a.distance(b) / 2.0,
        }
    }

    /// Circle through three points; the widest diameter circle when they are
    /// (numerically) collinear.
    fn through(a: Point2, b: Point2, c: Point2) -> Self {
        let (bx, by) = (b.x - a.x, b.y - a.y);
        let (cx, cy) = (c.x - a.x, c.y - a.y);
        let d = 2.0 * (bx * cy - by * cx);
        let scale = (bx * bx + by * by).max(cx * cx + cy * cy);
        if d.abs() <= 1e-12 * scale {
            let [ab, ac, bc] = [Self::diameter(a, b), Self::diameter(a, c), Self::diameter(b, c)];
            return [ab, ac, bc]
                .into_iter()
                .max_by(|x, y| x.radius_px.total_cmp(&y.radius_px))
                .unwrap_or(ab);
        }
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let ux = (cy * b2 - by * c2) / d;
        let uy = (bx * c2 - cx * b2) / d;
        let center = Point2::new(a.x + ux, a.y + uy);
        let radius = [a, b, c].iter().map(|p| center.distance(*p)).fold(0.0, f64::max);
        Self {
            center_px: center,
            radius_px: radius,
        }
    }
}

/// Smallest circle containing every point (Welzl's incremental algorithm
/// over a fixed-seed shuffle).
pub fn min_enclosing_circle(points: &[Point2]) -> Result<EnclosingCircle> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("enclosing circle of no points".into()));
    }
    let mut pts = points.to_vec();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));

    let mut c = EnclosingCircle {
        center_px: pts[0],
        radius_px: 0.0,
    };
    for i in 1..pts.len() {
        if c.contains(pts[i]) {
            continue;
        }
        c = EnclosingCircle {
            center_px: pts[i],
            radius_px: 0.0,
        };
        for j in 0..i {
            if c.contains(pts[j]) {
                continue;
            }
            c = EnclosingCircle::diameter(pts[i], pts[j]);
            for k in 0..j {
                if !c.contains(pts[k]) {
                    c = EnclosingCircle::through(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FixationVergence {
    pub centroid_dist_px: f64,
    pub circle_center_dist_px: f64,
    /// Centre distance over the sum of radii; 0 when both radii vanish.
    pub normalized_center_dist: f64,
    pub centroid_angle_deg: f64,
    pub center_angle_deg: f64,
    pub left_radius_px: f64,
    pub right_radius_px: f64,
}

/// Disparity between a matched left/right fixation pair.
pub fn fixation_vergence(left: &Fixation, right: &Fixation, samples: &[GazeSample]) -> FixationVergence {
    let circle = |f: &Fixation| {
        let pts: Vec<Point2> = f.points(samples).collect();
        min_enclosing_circle(&pts).unwrap_or(EnclosingCircle {
            center_px: f.centroid_px,
            radius_px: 0.0,
        })
    };
    let (lc, rc) = (circle(left), circle(right));
    let center_dist = lc.center_px.distance(rc.center_px);
    let radii = lc.radius_px + rc.radius_px;
    FixationVergence {
        centroid_dist_px: left.centroid_px.distance(right.centroid_px),
        circle_center_dist_px: center_dist,
        normalized_center_dist: if radii > 0.0 { center_dist / radii } else { 0.0 },
        centroid_angle_deg: screen_angle_deg(left.centroid_px, right.centroid_px),
        center_angle_deg: screen_angle_deg(lc.center_px, rc.center_px),
        left_radius_px: lc.radius_px,
        right_radius_px: rc.radius_px,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EyeGeometry {
    pub eye_distance_mean_mm: f64,
    pub eye_distance_sd_mm: f64,
    pub pd_mean_mm: f64,
    pub pd_sd_mm: f64,
}

/// Eye-to-screen distance and pupillary distance over samples carrying both
/// 3-D eye positions, or the configured constants when none do.
pub fn eye_geometry(samples: &[GazeSample], config: &GeometryConfig) -> EyeGeometry {
    let (d, pd): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter(|s| s.left_eye_mm.is_some() && s.right_eye_mm.is_some())
        .map(|s| config.eye_distances(s))
        .unzip();
    if d.is_empty() {
        return EyeGeometry {
            eye_distance_mean_mm: config.default_eye_distance_mm,
            eye_distance_sd_mm: 0.0,
            pd_mean_mm: config.default_pd_mm,
            pd_sd_mm: 0.0,
        };
    }
    EyeGeometry {
        eye_distance_mean_mm: mean(&d),
        eye_distance_sd_mm: sample_sd(&d),
        pd_mean_mm: mean(&pd),
        pd_sd_mm: sample_sd(&pd),
    }
}
