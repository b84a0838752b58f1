//! Fixation, saccade and blink segmentation.
//!
//! Fixations come from dispersion-threshold identification (I-DT). Every
//! sample stands for one sampling period, so an event covering samples
//! `i..j` spans `[t_i, t_{j-1} + period)`.

use std::io::Write;
use std::ops::Range;

use serde::Serialize;
use serde_json::json;

use crate::gaze::{Eye, GazeSample, Point2};

const EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdtParams {
    pub duration_ms: f64,
    pub dispersion_px: f64,
}

impl Default for IdtParams {
    fn default() -> Self {
        Self {
            duration_ms: 80.0,
            dispersion_px: 80.0,
        }
    }
}

/// Accepted blink durations; longer both-eye dropouts count as tracking loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlinkParams {
    pub min_ms: f64,
    pub max_ms: f64,
}

impl Default for BlinkParams {
    fn default() -> Self {
        Self {
            min_ms: 75.0,
            max_ms: 400.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub start_ms: f64,
    pub end_ms: f64,
}

impl Interval {
    pub fn duration(&self) -> f64 {
        self.end_ms - self.start_ms
    }

    pub fn midpoint(&self) -> f64 {
        (self.start_ms + self.end_ms) / 2.0
    }

    /// Length of the intersection with `[start, end)`.
    pub fn overlap(&self, start: f64, end: f64) -> f64 {
        (self.end_ms.min(end) - self.start_ms.max(start)).max(0.0)
    }

    fn intersects(&self, other: &Interval) -> bool {
        self.start_ms < other.end_ms && other.start_ms < self.end_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fixation {
    pub eye: Eye,
    pub start_ms: f64,
    pub end_ms: f64,
    pub centroid_px: Point2,
    pub sample_range: Range<usize>,
}

impl Fixation {
    pub fn interval(&self) -> Interval {
        Interval {
            start_ms: self.start_ms,
            end_ms: self.end_ms,
        }
    }

    pub fn duration(&self) -> f64 {
        self.end_ms - self.start_ms
    }

    /// Gaze points of the member samples for this fixation's eye.
    pub fn points<'a>(&'a self, samples: &'a [GazeSample]) -> impl Iterator<Item = Point2> + 'a {
        samples[self.sample_range.clone()]
            .iter()
            .filter_map(move |s| s.eye(self.eye))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Saccade {
    pub eye: Eye,
    pub start_ms: f64,
    pub end_ms: f64,
    pub from_px: Point2,
    pub to_px: Point2,
    pub length_px: f64,
    pub velocity_px_s: f64,
    /// Direction in degrees in `[-180, 180)`, counter-clockwise from +x with y up.
    pub angle_deg: f64,
}

impl Saccade {
    fn between(eye: Eye, start_ms: f64, end_ms: f64, from: Point2, to: Point2) -> Self {
        let length = from.distance(to);
        let secs = (end_ms - start_ms) / 1000.0;
        Self {
            eye,
            start_ms,
            end_ms,
            from_px: from,
            to_px: to,
            length_px: length,
            velocity_px_s: if secs > 0.0 { length / secs } else { 0.0 },
            angle_deg: screen_angle_deg(from, to),
        }
    }

    pub fn interval(&self) -> Interval {
        Interval {
            start_ms: self.start_ms,
            end_ms: self.end_ms,
        }
    }

    pub fn duration(&self) -> f64 {
        self.end_ms - self.start_ms
    }
}

pub type Blink = Interval;

/// Output of [`detect_blinks`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlinkScan {
    pub blinks: Vec<Blink>,
    /// Dropouts too long to be blinks.
    pub losses: Vec<Interval>,
}

/// Angle of the vector `from -> to` given in screen coordinates (y down),
/// measured with y up, in `[-180, 180)`.
pub fn screen_angle_deg(from: Point2, to: Point2) -> f64 {
    wrap_deg((-(to.y - from.y)).atan2(to.x - from.x).to_degrees())
}

/// Map an angle in degrees into `[-180, 180)`.
pub fn wrap_deg(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// Minimum number of samples that covers `duration_ms`.
pub fn samples_for(duration_ms: f64, period_ms: f64) -> usize {
    ((duration_ms / period_ms) - EPS).ceil().max(1.0) as usize
}

/// I-DT: open a window covering the minimum duration; while its dispersion
/// `(xmax - xmin) + (ymax - ymin)` stays within the threshold, grow it one
/// sample at a time and emit it as a fixation; otherwise slide by one.
/// Invalid samples never belong to a window.
pub fn detect_fixations_idt(
    samples: &[GazeSample],
    eye: Eye,
    period_ms: f64,
    params: &IdtParams,
) -> Vec<Fixation> {
    let pts: Vec<Option<Point2>> = samples.iter().map(|s| s.eye(eye)).collect();
    let n = pts.len();
    let min_len = samples_for(params.duration_ms, period_ms);
    let mut out = Vec::new();
    let mut i = 0;
    while i + min_len <= n {
        let window = &pts[i..i + min_len];
        if let Some(bad) = window.iter().rposition(Option::is_none) {
            i += bad + 1;
            continue;
        }
        let mut bbox = BBox::default();
        window.iter().flatten().for_each(|p| bbox.add(*p));
        if bbox.dispersion() > params.dispersion_px {
            i += 1;
            continue;
        }
        let mut j = i + min_len;
        while let Some(Some(p)) = pts.get(j) {
            let mut grown = bbox;
            grown.add(*p);
            if grown.dispersion() > params.dispersion_px {
                break;
            }
            bbox = grown;
            j += 1;
        }
        out.push(make_fixation(samples, &pts, eye, i..j, period_ms));
        i = j;
    }
    out
}

fn make_fixation(
    samples: &[GazeSample],
    pts: &[Option<Point2>],
    eye: Eye,
    range: Range<usize>,
    period_ms: f64,
) -> Fixation {
    let (sx, sy) = pts[range.clone()]
        .iter()
        .flatten()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    let count = range.len() as f64;
    Fixation {
        eye,
        start_ms: samples[range.start].t_ms,
        end_ms: samples[range.end - 1].t_ms + period_ms,
        centroid_px: Point2::new(sx / count, sy / count),
        sample_range: range,
    }
}

#[derive(Debug, Clone, Copy)]
struct BBox {
    min: Point2,
    max: Point2,
}

impl Default for BBox {
    fn default() -> Self {
        Self {
            min: Point2::new(f64::INFINITY, f64::INFINITY),
            max: Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }
}

impl BBox {
    fn add(&mut self, p: Point2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    fn dispersion(&self) -> f64 {
        (self.max.x - self.min.x) + (self.max.y - self.min.y)
    }
}

/// Maximal runs where neither eye is valid, split into blinks and losses.
pub fn detect_blinks(samples: &[GazeSample], period_ms: f64, params: &BlinkParams) -> BlinkScan {
    let mut scan = BlinkScan::default();
    let mut k = 0;
    while k < samples.len() {
        if !samples[k].both_invalid() {
            k += 1;
            continue;
        }
        let start = k;
        while k < samples.len() && samples[k].both_invalid() {
            k += 1;
        }
        let span = Interval {
            start_ms: samples[start].t_ms,
            end_ms: samples[k - 1].t_ms + period_ms,
        };
        let d = span.duration();
        if d > params.max_ms + EPS {
            scan.losses.push(span);
        } else if d >= params.min_ms - EPS {
            scan.blinks.push(span);
        }
    }
    scan
}

/// One saccade per qualifying gap around same-eye fixations.
///
/// A gap qualifies when it holds at least one valid sample of `eye` and does
/// not intersect any interval in `excluded` (blinks and tracking loss). The
/// gaps before the first and after the last fixation use the first / last
/// valid sample of the gap as their open endpoint.
pub fn detect_saccades(
    fixations: &[Fixation],
    samples: &[GazeSample],
    eye: Eye,
    period_ms: f64,
    excluded: &[Interval],
) -> Vec<Saccade> {
    let blocked = |iv: &Interval| excluded.iter().any(|e| e.intersects(iv));
    let valid_in = |r: Range<usize>| -> Vec<usize> { r.filter(|&k| samples[k].eye(eye).is_some()).collect() };
    let mut out = Vec::new();
    let (Some(first), Some(last)) = (fixations.first(), fixations.last()) else {
        return out;
    };

    let lead = valid_in(0..first.sample_range.start);
    if let Some(&k) = lead.first() {
        let s = Saccade::between(
            eye,
            samples[k].t_ms,
            first.start_ms,
            samples[k].eye(eye).unwrap_or_default(),
            first.centroid_px,
        );
        if !blocked(&s.interval()) {
            out.push(s);
        }
    }

    for w in fixations.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if valid_in(a.sample_range.end..b.sample_range.start).is_empty() {
            continue;
        }
        let s = Saccade::between(eye, a.end_ms, b.start_ms, a.centroid_px, b.centroid_px);
        if !blocked(&s.interval()) {
            out.push(s);
        }
    }

    let tail = valid_in(last.sample_range.end..samples.len());
    if let Some(&k) = tail.last() {
        let s = Saccade::between(
            eye,
            last.end_ms,
            samples[k].t_ms + period_ms,
            last.centroid_px,
            samples[k].eye(eye).unwrap_or_default(),
        );
        if !blocked(&s.interval()) {
            out.push(s);
        }
    }
    out
}

/// Match left and right fixations whose intervals overlap by at least half
/// of the shorter one. Greedy by overlap, ties to the earlier start; each
/// fixation is used at most once. Pairs come back in left-start order.
pub fn pair_fixations(left: &[Fixation], right: &[Fixation]) -> Vec<(Fixation, Fixation)> {
    pair_indices(left, right)
        .into_iter()
        .map(|(l, r)| (left[l].clone(), right[r].clone()))
        .collect()
}

pub(crate) fn pair_indices(left: &[Fixation], right: &[Fixation]) -> Vec<(usize, usize)> {
    let mut cands = Vec::new();
    for (li, l) in left.iter().enumerate() {
        for (ri, r) in right.iter().enumerate() {
            let ov = l.interval().overlap(r.start_ms, r.end_ms);
            let shorter = l.duration().min(r.duration());
            if ov > 0.0 && ov >= 0.5 * shorter {
                cands.push((ov, li, ri));
            }
        }
    }
    cands.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(left[a.1].start_ms.total_cmp(&left[b.1].start_ms))
            .then(right[a.2].start_ms.total_cmp(&right[b.2].start_ms))
    });
    let mut used_l = vec![false; left.len()];
    let mut used_r = vec![false; right.len()];
    let mut pairs = Vec::new();
    for (_, li, ri) in cands {
        if !used_l[li] && !used_r[ri] {
            used_l[li] = true;
            used_r[ri] = true;
            pairs.push((li, ri));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// All events of one stretch of samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OculomotorEvents {
    pub left_fixations: Vec<Fixation>,
    pub right_fixations: Vec<Fixation>,
    pub cyclopean_fixations: Vec<Fixation>,
    pub left_saccades: Vec<Saccade>,
    pub right_saccades: Vec<Saccade>,
    pub blinks: Vec<Blink>,
    pub losses: Vec<Interval>,
    /// Indices into `left_fixations` / `right_fixations`.
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EventParams {
    pub idt: IdtParams,
    pub blink: BlinkParams,
}

impl OculomotorEvents {
    pub fn detect(samples: &[GazeSample], period_ms: f64, params: &EventParams) -> Self {
        let idt = |eye| detect_fixations_idt(samples, eye, period_ms, &params.idt);
        let left_fixations = idt(Eye::Left);
        let right_fixations = idt(Eye::Right);
        let cyclopean_fixations = idt(Eye::Cyclopean);
        let BlinkScan { blinks, losses } = detect_blinks(samples, period_ms, &params.blink);
        let excluded: Vec<Interval> = blinks.iter().chain(&losses).copied().collect();
        let left_saccades = detect_saccades(&left_fixations, samples, Eye::Left, period_ms, &excluded);
        let right_saccades = detect_saccades(&right_fixations, samples, Eye::Right, period_ms, &excluded);
        let pairs = pair_indices(&left_fixations, &right_fixations);
        Self {
            left_fixations,
            right_fixations,
            cyclopean_fixations,
            left_saccades,
            right_saccades,
            blinks,
            losses,
            pairs,
        }
    }

    /// Debug dump, one JSON object per line.
    pub fn write_jsonl(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let fixations = self
            .left_fixations
            .iter()
            .chain(&self.right_fixations)
            .chain(&self.cyclopean_fixations);
        for f in fixations {
            let v = json!({"kind": "fixation", "eye": f.eye, "start_ms": f.start_ms, "end_ms": f.end_ms,
                "x": f.centroid_px.x, "y": f.centroid_px.y});
            writeln!(out, "{v}")?;
        }
        for s in self.left_saccades.iter().chain(&self.right_saccades) {
            let v = json!({"kind": "saccade", "eye": s.eye, "start_ms": s.start_ms, "end_ms": s.end_ms,
                "length_px": s.length_px, "velocity_px_s": s.velocity_px_s, "angle_deg": s.angle_deg});
            writeln!(out, "{v}")?;
        }
        for b in &self.blinks {
            writeln!(out, "{}", json!({"kind": "blink", "start_ms": b.start_ms, "end_ms": b.end_ms}))?;
        }
        Ok(())
    }
}
