//! The 1€ filter: exponential smoothing whose cutoff rises with speed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{GazeSample, Point2, Recording};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneEuroParams {
    pub min_cutoff_hz: f64,
    pub beta: f64,
    pub d_cutoff_hz: f64,
}

impl Default for OneEuroParams {
    fn default() -> Self {
        Self {
            min_cutoff_hz: 1.0,
            beta: 0.007,
            d_cutoff_hz: 1.0,
        }
    }
}

/// Filter state for one scalar channel.
#[derive(Debug, Clone, Default)]
pub struct OneEuro {
    prev: Option<(f64, f64, f64)>, // (t_ms, x_hat, dx_hat)
}

impl OneEuro {
    pub fn reset(&mut self) {
        self.prev = None;
    }

    pub fn filter(&mut self, params: &OneEuroParams, t_ms: f64, x: f64) -> f64 {
        let Some((t_prev, x_prev, dx_prev)) = self.prev else {
            self.prev = Some((t_ms, x, 0.0));
            return x;
        };
        let te = (t_ms - t_prev) / 1000.0;
        if te <= 0.0 {
            return x_prev;
        }
        let dx = (x - x_prev) / te;
        let dx_hat = smooth(smoothing_factor(te, params.d_cutoff_hz), dx, dx_prev);
        let cutoff = params.min_cutoff_hz + params.beta * dx_hat.abs();
        let x_hat = smooth(smoothing_factor(te, cutoff), x, x_prev);
        self.prev = Some((t_ms, x_hat, dx_hat));
        x_hat
    }
}

fn smoothing_factor(te: f64, cutoff: f64) -> f64 {
    let r = 2.0 * PI * cutoff * te;
    if r.is_infinite() {
        return 1.0;
    }
    r / (r + 1.0)
}

fn smooth(a: f64, x: f64, x_prev: f64) -> f64 {
    a * x + (1.0 - a) * x_prev
}

/// Online smoother for both eyes of a gaze stream. Invalid samples pass
/// through untouched and reset that eye's state.
#[derive(Debug, Clone, Default)]
pub struct GazeSmoother {
    params: OneEuroParams,
    eyes: [[OneEuro; 2]; 2],
}

impl GazeSmoother {
    pub fn new(params: OneEuroParams) -> Self {
        Self {
            params,
            eyes: Default::default(),
        }
    }

    pub fn push(&mut self, sample: &GazeSample) -> GazeSample {
        let mut out = *sample;
        out.left_px = self.eye(0, sample.t_ms, sample.left()).or(sample.left_px);
        out.right_px = self.eye(1, sample.t_ms, sample.right()).or(sample.right_px);
        out
    }

    fn eye(&mut self, i: usize, t_ms: f64, p: Option<Point2>) -> Option<Point2> {
        let [fx, fy] = &mut self.eyes[i];
        match p {
            Some(p) => Some(Point2::new(
                fx.filter(&self.params, t_ms, p.x),
                fy.filter(&self.params, t_ms, p.y),
            )),
            None => {
                fx.reset();
                fy.reset();
                None
            }
        }
    }
}

/// Smooth every eye channel of a resampled recording.
pub fn one_euro_filter(rec: &Recording, params: OneEuroParams) -> Recording {
    let mut smoother = GazeSmoother::new(params);
    let samples = rec.samples.iter().map(|s| smoother.push(s)).collect();
    Recording {
        samples,
        ..rec.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::ScreenConfig;

    fn series(xs: &[f64]) -> Recording {
        let samples = xs
            .iter()
            .enumerate()
            .map(|(k, &x)| GazeSample::binocular(k as f64 * 1000.0 / 60.0, Point2::new(x, -x), Point2::new(x, 0.0)))
            .collect();
        Recording::new("p", ScreenConfig::default(), samples)
    }

    fn left_x(r: &Recording) -> Vec<f64> {
        r.samples.iter().map(|s| s.left().unwrap().x).collect()
    }

    #[test]
    fn constant_signal_is_a_fixed_point() {
        let r = one_euro_filter(&series(&[3.25; 50]), OneEuroParams::default());
        assert!(left_x(&r).iter().all(|&x| x == 3.25));
    }

    #[test]
    fn step_response_is_monotone_without_overshoot() {
        let mut xs = vec![0.0; 5];
        xs.extend([1.0; 200]);
        let out = left_x(&one_euro_filter(&series(&xs), OneEuroParams::default()));
        for w in out.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(out.iter().all(|&x| x <= 1.0));
        assert!(out[out.len() - 1] > 0.99);
    }

    #[test]
    fn infinite_cutoff_passes_input_through() {
        let xs: Vec<f64> = (0..100).map(|k| (k as f64 * 0.3).sin() * 40.0).collect();
        let params = OneEuroParams {
            min_cutoff_hz: 1e12,
            beta: 0.0,
            d_cutoff_hz: 1.0,
        };
        let out = left_x(&one_euro_filter(&series(&xs), params));
        for (a, b) in out.iter().zip(&xs) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn gaps_pass_through_and_reset() {
        let mut r = series(&[0.0, 0.0, 0.0, 10.0, 10.0]);
        r.samples[2].left_valid = false;
        let out = one_euro_filter(&r, OneEuroParams::default());
        assert_eq!(out.samples[2], r.samples[2]);
        // state restarted at the first valid sample after the gap
        assert_eq!(out.samples[3].left().unwrap().x, 10.0);
        assert_eq!(out.samples.len(), r.samples.len());
        for (a, b) in out.samples.iter().zip(&r.samples) {
            assert_eq!(a.t_ms, b.t_ms);
        }
    }
}
