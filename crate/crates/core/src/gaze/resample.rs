use super::{GazeSample, Point2, Point3, Recording};
use crate::error::{Error, Result};

/// Dropouts longer than this stay invalid after resampling.
pub const MAX_BRIDGE_GAP_MS: f64 = 100.0;

const TIME_EPS: f64 = 1e-9;

#[derive(Clone, Copy)]
struct Knot {
    t: f64,
    p: Point2,
    eye: Option<Point3>,
}

/// Put a recording on a fixed-rate grid starting at its first timestamp.
///
/// Each eye is interpolated linearly between the surrounding valid samples
/// of that eye. A grid point is valid only if both brackets exist and lie at
/// most [`MAX_BRIDGE_GAP_MS`] apart. The grid never extends past the last
/// source timestamp.
pub fn resample(rec: &Recording, rate_hz: f64) -> Result<Recording> {
    if rec.samples.len() < 2 {
        return Err(Error::TooFewSamples {
            need: 2,
            got: rec.samples.len(),
        });
    }
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate must be positive, got {rate_hz}")));
    }
    let t0 = rec.samples[0].t_ms;
    let t_last = rec.samples[rec.samples.len() - 1].t_ms;
    let n = ((t_last - t0) * rate_hz / 1000.0 + 1e-6).floor() as usize + 1;

    let knots = |pick: fn(&GazeSample) -> (Option<Point2>, Option<Point3>)| -> Vec<Knot> {
        rec.samples
            .iter()
            .filter_map(|s| {
                let (p, eye) = pick(s);
                p.map(|p| Knot { t: s.t_ms, p, eye })
            })
            .collect()
    };
    let left = knots(|s| (s.left(), s.left_eye_mm));
    let right = knots(|s| (s.right(), s.right_eye_mm));

    let mut li = EyeCursor::new(&left);
    let mut ri = EyeCursor::new(&right);
    let samples = (0..n)
        .map(|k| {
            let t = (t0 + k as f64 * 1000.0 / rate_hz).min(t_last);
            let l = li.at(t);
            let r = ri.at(t);
            GazeSample {
                t_ms: t,
                left_px: l.map(|k| k.p),
                right_px: r.map(|k| k.p),
                left_valid: l.is_some(),
                right_valid: r.is_some(),
                left_eye_mm: l.and_then(|k| k.eye),
                right_eye_mm: r.and_then(|k| k.eye),
            }
        })
        .collect();

    Ok(Recording {
        samples,
        nominal_rate_hz: rate_hz,
        ..rec.clone()
    })
}

/// Walks the valid knots of one eye for ascending query times.
struct EyeCursor<'a> {
    knots: &'a [Knot],
    next: usize,
}

impl<'a> EyeCursor<'a> {
    fn new(knots: &'a [Knot]) -> Self {
        Self { knots, next: 0 }
    }

    fn at(&mut self, t: f64) -> Option<Knot> {
        while self.next < self.knots.len() && self.knots[self.next].t <= t + TIME_EPS {
            self.next += 1;
        }
        // knots[next - 1].t <= t < knots[next].t
        let before = self.next.checked_sub(1).map(|i| self.knots[i])?;
        if (before.t - t).abs() <= TIME_EPS {
            return Some(before);
        }
        let after = *self.knots.get(self.next)?;
        if after.t - before.t > MAX_BRIDGE_GAP_MS {
            return None;
        }
        let w = (t - before.t) / (after.t - before.t);
        let eye = match (before.eye, after.eye) {
            (Some(a), Some(b)) => Some(a.lerp(b, w)),
            _ => None,
        };
        Some(Knot {
            t,
            p: before.p.lerp(after.p, w),
            eye,
        })
    }
}
