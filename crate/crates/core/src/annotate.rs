//! Blur annotation: schedules, event logs and label derivation.
//!
//! A video blurs gradually from each scheduled onset until the viewer
//! deblurs it. A viewer attending the video notices the blur within `T_d`;
//! a slower deblur marks the interval from `T_d` after onset to `T_r`
//! before the deblur as internal thought, and the 1.5 s after it as
//! spontaneous on-task viewing.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Window;
use crate::stats::{mean, sample_sd};

pub const APERTURE_PX: u32 = 15;
pub const ONSET_GAP_MS: (u32, u32) = (10_000, 20_000);
pub const DEFAULT_COVERAGE: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    InternalThought,
    DeliberateOnTask,
    SpontaneousOnTask,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::InternalThought => "InternalThought",
            Label::DeliberateOnTask => "DeliberateOnTask",
            Label::SpontaneousOnTask => "SpontaneousOnTask",
        }
    }

    /// The two-class label used for training.
    pub fn binary(self) -> &'static str {
        match self {
            Label::InternalThought => "InternalThought",
            Label::DeliberateOnTask | Label::SpontaneousOnTask => "OnTask",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "InternalThought" => Ok(Label::InternalThought),
            "DeliberateOnTask" => Ok(Label::DeliberateOnTask),
            "SpontaneousOnTask" => Ok(Label::SpontaneousOnTask),
            other => Err(Error::InvalidArgument(format!("unknown label {other:?}"))),
        }
    }
}

/// Maps any on-task label to `OnTask`; other strings pass through.
pub fn binarize(label: &str) -> &str {
    Label::from_str(label).map_or(label, |l| l.binary())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeblurEvent {
    pub blur_start_ms: f64,
    pub deblur_ms: f64,
}

impl DeblurEvent {
    pub fn new(blur_start_ms: f64, deblur_ms: f64) -> Self {
        Self { blur_start_ms, deblur_ms }
    }

    pub fn t_deblur_ms(&self) -> f64 {
        self.deblur_ms - self.blur_start_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentSource {
    /// Index into the deblur events that produced the segment.
    Deblur { event: usize, blur_start_ms: f64, deblur_ms: f64 },
    /// A whole-session annotation.
    Session,
    /// Ground truth from the synthetic generator.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub class: Label,
    pub start_ms: f64,
    pub end_ms: f64,
    pub source: SegmentSource,
    /// For spontaneous on-task segments: the deblur was quick.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engaged: Option<bool>,
}

impl LabeledSegment {
    pub fn duration(&self) -> f64 {
        self.end_ms - self.start_ms
    }

    /// A segment covering a whole recording.
    pub fn session(class: Label, start_ms: f64, end_ms: f64) -> Self {
        Self {
            class,
            start_ms,
            end_ms,
            source: SegmentSource::Session,
            engaged: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelParams {
    pub t_d_ms: f64,
    pub t_r_ms: f64,
    /// Deblurs at or below this count as engaged.
    pub engaged_ms: f64,
    pub spontaneous_ms: f64,
    /// Longer internal-thought candidates are outliers.
    pub max_internal_ms: f64,
}

impl Default for LabelParams {
    fn default() -> Self {
        Self {
            t_d_ms: 1200.0,
            t_r_ms: 300.0,
            engaged_ms: 1500.0,
            spontaneous_ms: 1500.0,
            max_internal_ms: 10_000.0,
        }
    }
}

fn check_events(events: &[DeblurEvent]) -> Result<()> {
    for (i, e) in events.iter().enumerate() {
        if !(e.t_deblur_ms() > 0.0) {
            return Err(Error::InvalidArgument(format!("event {i}: deblur does not follow blur start")));
        }
        if i > 0 && e.blur_start_ms < events[i - 1].deblur_ms {
            return Err(Error::OverlappingEvents(i));
        }
    }
    Ok(())
}

pub fn derive_labels(events: &[DeblurEvent], params: &LabelParams) -> Result<Vec<LabeledSegment>> {
    check_events(events)?;
    let mut out = Vec::new();
    for (i, e) in events.iter().enumerate() {
        let source = SegmentSource::Deblur {
            event: i,
            blur_start_ms: e.blur_start_ms,
            deblur_ms: e.deblur_ms,
        };
        let boundary = e.deblur_ms - params.t_r_ms;
        let t = e.t_deblur_ms();
        let engaged = t <= params.engaged_ms;
        if !engaged && t > params.t_d_ms + params.t_r_ms {
            let start = e.blur_start_ms + params.t_d_ms;
            if boundary - start <= params.max_internal_ms {
                out.push(LabeledSegment {
                    class: Label::InternalThought,
                    start_ms: start,
                    end_ms: boundary,
                    source: source.clone(),
                    engaged: None,
                });
            }
        }
        out.push(LabeledSegment {
            class: Label::SpontaneousOnTask,
            start_ms: boundary,
            end_ms: boundary + params.spontaneous_ms,
            source,
            engaged: Some(engaged),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogKind {
    BlurStart,
    Deblur,
    SessionEnd,
}

/// One line of the UI event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub kind: LogKind,
    pub t_ms: f64,
    pub session: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl LogEvent {
    pub fn parse(line: &str) -> std::result::Result<Self, String> {
        let e: LogEvent = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if !e.t_ms.is_finite() || e.t_ms < 0.0 {
            return Err("t_ms must be a finite non-negative number".into());
        }
        if e.session.is_empty() {
            return Err("empty session".into());
        }
        if e.kind == LogKind::BlurStart && !e.alpha.is_some_and(|a| a.is_finite() && a > 0.0) {
            return Err("blur_start needs a positive alpha".into());
        }
        Ok(e)
    }
}

/// Parse a JSONL event log; blank lines are skipped.
pub fn parse_event_log(input: impl BufRead) -> Result<Vec<LogEvent>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::EventLog { line: i + 1, msg: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(LogEvent::parse(&line).map_err(|msg| Error::EventLog { line: i + 1, msg })?);
    }
    Ok(out)
}

/// Pair each blur start with the following deblur. A blur still running at
/// the end of the log produces no event.
pub fn pair_events(log: &[LogEvent]) -> Result<Vec<DeblurEvent>> {
    let mut out = Vec::new();
    let mut open: Option<f64> = None;
    let mut last_t = f64::NEG_INFINITY;
    for (i, e) in log.iter().enumerate() {
        let line = i + 1;
        if e.t_ms < last_t {
            return Err(Error::EventLog { line, msg: "timestamps go backwards".into() });
        }
        last_t = e.t_ms;
        match (e.kind, open) {
            (LogKind::BlurStart, None) => open = Some(e.t_ms),
            (LogKind::BlurStart, Some(_)) => {
                return Err(Error::EventLog { line, msg: "blur_start while already blurred".into() })
            }
            (LogKind::Deblur, Some(start)) => {
                out.push(DeblurEvent::new(start, e.t_ms));
                open = None;
            }
            (LogKind::Deblur, None) => return Err(Error::EventLog { line, msg: "deblur without blur_start".into() }),
            (LogKind::SessionEnd, _) => break,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeblurHistogram {
    pub bin_ms: f64,
    /// `counts[k]` holds deblur times in `[k * bin_ms, (k + 1) * bin_ms)`.
    pub counts: Vec<u64>,
    pub n_events: usize,
    pub internal_mean_ms: f64,
    pub internal_sd_ms: f64,
}

pub fn deblur_histogram(events: &[DeblurEvent], bin_ms: f64, params: &LabelParams) -> Result<DeblurHistogram> {
    if !(bin_ms > 0.0) {
        return Err(Error::InvalidArgument("bin width must be positive".into()));
    }
    let mut counts: Vec<u64> = Vec::new();
    for e in events {
        let k = (e.t_deblur_ms().max(0.0) / bin_ms).floor() as usize;
        if counts.len() <= k {
            counts.resize(k + 1, 0);
        }
        counts[k] += 1;
    }
    let internal: Vec<f64> = derive_labels(events, params)?
        .iter()
        .filter(|s| s.class == Label::InternalThought)
        .map(LabeledSegment::duration)
        .collect();
    Ok(DeblurHistogram {
        bin_ms,
        counts,
        n_events: events.len(),
        internal_mean_ms: mean(&internal),
        internal_sd_ms: sample_sd(&internal),
    })
}

/// For each window, the index of the segment covering at least `coverage`
/// of it.
pub fn assign_windows(windows: &[Window], segments: &[LabeledSegment], coverage: f64) -> Vec<Option<usize>> {
    windows
        .iter()
        .map(|w| {
            let size = w.end_ms - w.start_ms;
            segments.iter().position(|s| {
                let overlap = (w.end_ms.min(s.end_ms) - w.start_ms.max(s.start_ms)).max(0.0);
                overlap >= coverage * size - 1e-9
            })
        })
        .collect()
}

pub fn label_windows(windows: &[Window], segments: &[LabeledSegment], coverage: f64) -> Vec<Option<Label>> {
    assign_windows(windows, segments, coverage)
        .into_iter()
        .map(|i| i.map(|i| segments[i].class))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlurSchedule {
    pub session_id: String,
    pub alpha: f64,
    pub aperture_px: u32,
    pub onsets_ms: Vec<f64>,
    pub rng_seed: u64,
    pub video_duration_ms: f64,
}

impl BlurSchedule {
    /// Pretty JSON with a trailing newline; the stored and served form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes") + "\n"
    }
}

/// Onsets at cumulative gaps drawn uniformly from whole milliseconds in
/// `[10000, 20000]`, kept while before the end of the video.
pub fn make_schedule(session_id: &str, video_duration_ms: f64, alpha: f64, seed: u64) -> Result<BlurSchedule> {
    if !(video_duration_ms > ONSET_GAP_MS.1 as f64) || !video_duration_ms.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "video duration must exceed {} ms",
            ONSET_GAP_MS.1
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut onsets = Vec::new();
    let mut t = 0.0;
    loop {
        t += rng.random_range(ONSET_GAP_MS.0..=ONSET_GAP_MS.1) as f64;
        if t >= video_duration_ms {
            break;
        }
        onsets.push(t);
    }
    Ok(BlurSchedule {
        session_id: session_id.to_string(),
        alpha,
        aperture_px: APERTURE_PX,
        onsets_ms: onsets,
        rng_seed: seed,
        video_duration_ms,
    })
}

/// Blur strength `alpha * t` with `t` in seconds since the onset.
pub fn sigma(alpha: f64, since_onset_ms: f64) -> f64 {
    alpha * since_onset_ms.max(0.0) / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spans(s: &[LabeledSegment]) -> Vec<(Label, f64, f64, Option<bool>)> {
        s.iter().map(|s| (s.class, s.start_ms, s.end_ms, s.engaged)).collect()
    }

    #[test]
    fn label_arithmetic() {
        let p = LabelParams::default();
        let s = derive_labels(&[DeblurEvent::new(10_000.0, 13_000.0)], &p).unwrap();
        assert_eq!(
            spans(&s),
            vec![
                (Label::InternalThought, 11_200.0, 12_700.0, None),
                (Label::SpontaneousOnTask, 12_700.0, 14_200.0, Some(false)),
            ]
        );
        let s = derive_labels(&[DeblurEvent::new(5000.0, 6000.0)], &p).unwrap();
        assert_eq!(spans(&s), vec![(Label::SpontaneousOnTask, 5700.0, 7200.0, Some(true))]);
        let s = derive_labels(&[DeblurEvent::new(0.0, 12_000.0)], &p).unwrap();
        assert!(s.iter().all(|s| s.class != Label::InternalThought));
        // exactly at the limit is kept
        let s = derive_labels(&[DeblurEvent::new(0.0, 11_500.0)], &p).unwrap();
        assert_eq!(s[0].duration(), 10_000.0);
    }

    #[test]
    fn rejects_overlap() {
        let e = [DeblurEvent::new(0.0, 5000.0), DeblurEvent::new(4000.0, 9000.0)];
        assert!(matches!(derive_labels(&e, &LabelParams::default()), Err(Error::OverlappingEvents(1))));
        assert!(derive_labels(&[DeblurEvent::new(10.0, 10.0)], &LabelParams::default()).is_err());
    }

    #[test]
    fn event_log() {
        let log = r#"{"kind":"blur_start","t_ms":10000,"session":"s1","alpha":1}
{"kind":"deblur","t_ms":13000,"session":"s1"}

{"kind":"blur_start","t_ms":25000,"session":"s1","alpha":1}
{"kind":"deblur","t_ms":26000,"session":"s1"}
{"kind":"blur_start","t_ms":40000,"session":"s1","alpha":1}
{"kind":"session_end","t_ms":41000,"session":"s1"}
"#;
        let events = pair_events(&parse_event_log(log.as_bytes()).unwrap()).unwrap();
        assert_eq!(events, vec![DeblurEvent::new(10_000.0, 13_000.0), DeblurEvent::new(25_000.0, 26_000.0)]);

        let bad = "{\"kind\":\"deblur\",\"t_ms\":1,\"session\":\"s\"}\n{\"kind\":\"oops\"}\n";
        assert!(matches!(parse_event_log(bad.as_bytes()), Err(Error::EventLog { line: 2, .. })));
        let orphan = parse_event_log(bad.lines().next().unwrap().as_bytes()).unwrap();
        assert!(pair_events(&orphan).is_err());
        assert!(LogEvent::parse(r#"{"kind":"blur_start","t_ms":1,"session":"s"}"#).is_err());
    }

    #[test]
    fn histogram() {
        let same: Vec<_> = (0..5).map(|i| DeblurEvent::new(i as f64 * 20_000.0, i as f64 * 20_000.0 + 1000.0)).collect();
        let h = deblur_histogram(&same, 500.0, &LabelParams::default()).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts[2], 5);
        assert_eq!(h.internal_mean_ms, 0.0);

        let mixed: Vec<_> = [800.0, 1900.0, 2500.0, 2600.0, 9000.0]
            .iter()
            .enumerate()
            .map(|(i, t)| DeblurEvent::new(i as f64 * 20_000.0, i as f64 * 20_000.0 + t))
            .collect();
        let h = deblur_histogram(&mixed, 1000.0, &LabelParams::default()).unwrap();
        assert_eq!(h.counts, vec![1, 1, 2, 0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(h.counts.iter().sum::<u64>(), 5);
        // internal durations 400, 1000, 1100, 7500
        assert_eq!(h.internal_mean_ms, 2500.0);
    }

    fn window(start: f64, size: f64) -> Window {
        Window {
            start_ms: start,
            end_ms: start + size,
            size_ms: size,
            sample_range: 0..0,
            valid_ratio: 1.0,
        }
    }

    #[test]
    fn window_labels() {
        let seg = vec![LabeledSegment::session(Label::InternalThought, 1000.0, 2500.0)];
        let l = label_windows(&[window(1200.0, 1000.0), window(500.0, 1000.0), window(3000.0, 250.0)], &seg, 0.8);
        assert_eq!(l, vec![Some(Label::InternalThought), None, None]);

        // 250 ms windows stepped 62.5 ms: starts at k*62.5 with coverage 200 ms
        let ws: Vec<Window> = (0..48).map(|k| window(k as f64 * 62.5, 250.0)).collect();
        let l = label_windows(&ws, &seg, 0.8);
        let brute = ws
            .iter()
            .filter(|w| w.start_ms >= 1000.0 - 50.0 && w.end_ms <= 2500.0 + 50.0)
            .count();
        assert_eq!(l.iter().flatten().count(), brute);
        assert_eq!(brute, 21);
    }

    #[test]
    fn schedule_basics() {
        let a = make_schedule("s", 60_000.0, 1.0, 7).unwrap();
        assert_eq!(a, make_schedule("s", 60_000.0, 1.0, 7).unwrap());
        assert_eq!(a.aperture_px, 15);
        assert!(make_schedule("s", 20_000.0, 1.0, 7).is_err());
        assert!(make_schedule("s", 60_000.0, 0.0, 7).is_err());
        assert_eq!(sigma(1.0, 2000.0), 2.0);
        assert_eq!(sigma(0.5, 2000.0), 1.0);
    }

    #[test]
    fn schedule_counts_over_many_seeds() {
        for seed in 0..1000 {
            let n = make_schedule("s", 60_000.0, 1.0, seed).unwrap().onsets_ms.len();
            assert!((2..=5).contains(&n), "seed {seed}: {n}");
        }
    }

    proptest! {
        #[test]
        fn schedule_gaps(seed in any::<u64>(), dur in 20_001.0f64..600_000.0) {
            let s = make_schedule("x", dur, 2.0, seed).unwrap();
            let mut prev = 0.0;
            for &t in &s.onsets_ms {
                prop_assert!((10_000.0..=20_000.0).contains(&(t - prev)));
                prop_assert!(t < dur);
                prev = t;
            }
            prop_assert!(dur - prev <= 20_000.0);
        }

        #[test]
        fn segment_invariants(gaps in prop::collection::vec((1u32..15_000, 1u32..20_000), 1..20)) {
            let mut t = 0.0;
            let events: Vec<DeblurEvent> = gaps.iter().map(|&(wait, dt)| {
                let start = t + wait as f64;
                t = start + dt as f64;
                DeblurEvent::new(start, t)
            }).collect();
            let p = LabelParams::default();
            let segs = derive_labels(&events, &p).unwrap();
            for s in &segs {
                prop_assert!(s.start_ms < s.end_ms);
                match s.class {
                    Label::InternalThought => prop_assert!(s.duration() > 0.0 && s.duration() <= 10_000.0),
                    _ => prop_assert_eq!(s.duration(), 1500.0),
                }
            }
            for w in segs.windows(2) {
                if w[0].class == Label::InternalThought {
                    prop_assert_eq!(w[0].end_ms, w[1].start_ms);
                    prop_assert_eq!(&w[0].source, &w[1].source);
                }
            }
            let slow = LabelParams { t_d_ms: 30_000.0, ..p };
            prop_assert!(derive_labels(&events, &slow).unwrap().iter().all(|s| s.class != Label::InternalThought));
        }
    }
}
