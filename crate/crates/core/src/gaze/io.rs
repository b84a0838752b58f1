//! Gaze file ingestion and serialization (JSONL and CSV).

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{GazeSample, Point2, Point3, Recording, ScreenConfig};
use crate::error::{Error, Result};

/// Fraction of malformed lines above which parsing fails outright.
const MAX_MALFORMED_FRACTION: f64 = 0.10;

const CSV_COLUMNS: [&str; 9] = ["t_ms", "lx", "ly", "rx", "ry", "lv", "rv", "le", "re"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GazeFormat {
    Jsonl,
    Csv,
}

impl GazeFormat {
    /// Guess the format from a file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => GazeFormat::Csv,
            _ => GazeFormat::Jsonl,
        }
    }
}

impl FromStr for GazeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" | "json" => Ok(GazeFormat::Jsonl),
            "csv" => Ok(GazeFormat::Csv),
            other => Err(Error::InvalidArgument(format!("unknown gaze format {other:?}"))),
        }
    }
}

/// A parsed recording together with the 1-based line numbers that were
/// skipped as malformed.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub recording: Recording,
    pub malformed_lines: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GazeRow {
    t_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ly: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ry: Option<f64>,
    lv: bool,
    rv: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    le: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    re: Option<[f64; 3]>,
}

impl GazeRow {
    fn from_sample(s: &GazeSample) -> Self {
        Self {
            t_ms: s.t_ms,
            lx: s.left_px.map(|p| p.x),
            ly: s.left_px.map(|p| p.y),
            rx: s.right_px.map(|p| p.x),
            ry: s.right_px.map(|p| p.y),
            lv: s.left_valid,
            rv: s.right_valid,
            le: s.left_eye_mm.map(Point3::to_array),
            re: s.right_eye_mm.map(Point3::to_array),
        }
    }

    fn into_sample(self) -> std::result::Result<GazeSample, String> {
        if !self.t_ms.is_finite() {
            return Err("non-finite t_ms".into());
        }
        let left_px = point(self.lx, self.ly, self.lv, "left")?;
        let right_px = point(self.rx, self.ry, self.rv, "right")?;
        let left_eye_mm = eye(self.le, "le")?;
        let right_eye_mm = eye(self.re, "re")?;
        Ok(GazeSample {
            t_ms: self.t_ms,
            left_px,
            right_px,
            left_valid: self.lv,
            right_valid: self.rv,
            left_eye_mm,
            right_eye_mm,
        })
    }
}

fn point(
    x: Option<f64>,
    y: Option<f64>,
    valid: bool,
    which: &str,
) -> std::result::Result<Option<Point2>, String> {
    match (x, y) {
        (Some(x), Some(y)) if x.is_finite() && y.is_finite() => Ok(Some(Point2::new(x, y))),
        _ if !valid => Ok(None),
        _ => Err(format!("{which} eye marked valid without finite coordinates")),
    }
}

fn eye(v: Option<[f64; 3]>, which: &str) -> std::result::Result<Option<Point3>, String> {
    match v {
        None => Ok(None),
        Some(a) if a.iter().all(|c| c.is_finite()) && a[2] > 0.0 => Ok(Some(Point3::from_array(a))),
        Some(_) => Err(format!("{which} must be finite with z > 0")),
    }
}

/// Parse one JSONL gaze line, as used by streaming sources.
pub fn parse_sample_line(line: &str) -> std::result::Result<GazeSample, String> {
    serde_json::from_str::<GazeRow>(line)
        .map_err(|e| e.to_string())
        .and_then(GazeRow::into_sample)
}

/// Read a recording from `path`.
///
/// Malformed lines are skipped and reported; more than 10% malformed lines
/// is a hard error. Samples whose timestamp does not increase are treated
/// as malformed. The participant id defaults to the file stem.
pub fn parse_recording(path: &Path, format: GazeFormat, screen: ScreenConfig) -> Result<Ingested> {
    screen.validate()?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows = match format {
        GazeFormat::Jsonl => jsonl_rows(&text),
        GazeFormat::Csv => csv_rows(&text).map_err(|msg| Error::Dataset(format!("{}: {msg}", path.display())))?,
    };

    let total = rows.len();
    let mut samples: Vec<GazeSample> = Vec::with_capacity(total);
    let mut malformed = Vec::new();
    for (line, row) in rows {
        let sample = row.and_then(GazeRow::into_sample).and_then(|s| match samples.last() {
            Some(prev) if s.t_ms <= prev.t_ms => Err("timestamp not increasing".to_string()),
            _ => Ok(s),
        });
        match sample {
            Ok(s) => samples.push(s),
            Err(_) => malformed.push(line),
        }
    }

    if samples.is_empty() && malformed.is_empty() {
        return Err(Error::NoSamples { path: path.into() });
    }
    if malformed.len() as f64 > MAX_MALFORMED_FRACTION * total as f64 || samples.is_empty() {
        return Err(Error::TooManyMalformed {
            path: path.into(),
            bad: malformed.len(),
            total,
            lines: malformed,
        });
    }

    let participant = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    Ok(Ingested {
        recording: Recording::new(participant, screen, samples),
        malformed_lines: malformed,
    })
}

type Row = (usize, std::result::Result<GazeRow, String>);

fn jsonl_rows(text: &str) -> Vec<Row> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, serde_json::from_str::<GazeRow>(l).map_err(|e| e.to_string())))
        .collect()
}

fn csv_rows(text: &str) -> std::result::Result<Vec<Row>, String> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let idx: Vec<Option<usize>> = CSV_COLUMNS.iter().map(|c| col(c)).collect();
    for required in ["t_ms", "lv", "rv"] {
        if col(required).is_none() {
            return Err(format!("missing column {required:?}"));
        }
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                rows.push((line, Err(e.to_string())));
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let field = |k: usize| idx[k].and_then(|i| record.get(i)).filter(|f| !f.is_empty());
        rows.push((line, csv_row(&field)));
    }
    Ok(rows)
}

fn csv_row<'a>(field: &dyn Fn(usize) -> Option<&'a str>) -> std::result::Result<GazeRow, String> {
    let num = |k: usize| -> std::result::Result<Option<f64>, String> {
        field(k)
            .map(|f| f.parse::<f64>().map_err(|e| format!("{}: {e}", CSV_COLUMNS[k])))
            .transpose()
    };
    let flag = |k: usize| -> std::result::Result<bool, String> {
        match field(k) {
            Some("true" | "1") => Ok(true),
            Some("false" | "0") => Ok(false),
            other => Err(format!("{}: bad flag {other:?}", CSV_COLUMNS[k])),
        }
    };
    let triple = |k: usize| -> std::result::Result<Option<[f64; 3]>, String> {
        let Some(f) = field(k) else { return Ok(None) };
        let parts: Vec<f64> = f
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("{}: {e}", CSV_COLUMNS[k]))?;
        <[f64; 3]>::try_from(parts)
            .map(Some)
            .map_err(|_| format!("{}: expected three numbers", CSV_COLUMNS[k]))
    };
    Ok(GazeRow {
        t_ms: num(0)?.ok_or("missing t_ms")?,
        lx: num(1)?,
        ly: num(2)?,
        rx: num(3)?,
        ry: num(4)?,
        lv: flag(5)?,
        rv: flag(6)?,
        le: triple(7)?,
        re: triple(8)?,
    })
}

/// Serialize samples in the given format.
pub fn write_recording(samples: &[GazeSample], format: GazeFormat, out: &mut dyn Write) -> Result<()> {
    match format {
        GazeFormat::Jsonl => {
            for s in samples {
                serde_json::to_writer(&mut *out, &GazeRow::from_sample(s))?;
                out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
            }
        }
        GazeFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_COLUMNS)?;
            let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            let tri = |v: Option<Point3>| {
                v.map(|p| format!("{} {} {}", p.x, p.y, p.z)).unwrap_or_default()
            };
            for s in samples {
                w.write_record([
                    s.t_ms.to_string(),
                    opt(s.left_px.map(|p| p.x)),
                    opt(s.left_px.map(|p| p.y)),
                    opt(s.right_px.map(|p| p.x)),
                    opt(s.right_px.map(|p| p.y)),
                    s.left_valid.to_string(),
                    s.right_valid.to_string(),
                    tri(s.left_eye_mm),
                    tri(s.right_eye_mm),
                ])?;
            }
            w.flush().map_err(|e| Error::io("<output>", e))?;
        }
    }
    Ok(())
}

/// Read a screen sidecar `{"width_px","height_px","width_mm","height_mm"}`.
pub fn read_screen_config(path: &Path) -> Result<ScreenConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: ScreenConfig = serde_json::from_str(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_jsonl_lines() {
        let f = write_tmp(
            r#"{"t_ms":0,"lx":1,"ly":2,"rx":3,"ry":4,"lv":true,"rv":true}
{"t_ms":16.5,"lx":1,"ly":2,"rx":3,"ry":4,"lv":true,"rv":true,"le":[-31.5,0,600],"re":[31.5,0,600]}
{"t_ms":33,"lx":1,"ly":2,"rx":3,"ry":4,"lv":true,"rv":false}
"#,
            ".jsonl",
        );
        let ing = parse_recording(f.path(), GazeFormat::Jsonl, ScreenConfig::default()).unwrap();
        assert_eq!(ing.recording.samples.len(), 3);
        assert!(ing.malformed_lines.is_empty());
        assert_eq!(ing.recording.samples[1].left_eye_mm, Some(Point3::new(-31.5, 0.0, 600.0)));
        assert_eq!(ing.recording.samples[0].left(), Some(Point2::new(1.0, 2.0)));
        assert_eq!(ing.recording.samples[2].right(), None);
    }

    #[test]
    fn empty_file_is_no_samples() {
        let f = write_tmp("", ".jsonl");
        let err = parse_recording(f.path(), GazeFormat::Jsonl, ScreenConfig::default()).unwrap_err();
        assert!(err.to_string().contains("no samples"), "{err}");
    }

    #[test]
    fn missing_coordinates_accepted_when_invalid() {
        let f = write_tmp(r#"{"t_ms":0,"lx":5,"ly":6,"lv":true,"rv":false}"#, ".jsonl");
        let ing = parse_recording(f.path(), GazeFormat::Jsonl, ScreenConfig::default()).unwrap();
        let s = ing.recording.samples[0];
        assert_eq!(s.right_px, None);
        assert!(!s.right_valid);

        let mut buf = Vec::new();
        write_recording(&ing.recording.samples, GazeFormat::Jsonl, &mut buf).unwrap();
        let g = write_tmp(std::str::from_utf8(&buf).unwrap(), ".jsonl");
        let again = parse_recording(g.path(), GazeFormat::Jsonl, ScreenConfig::default()).unwrap();
        assert_eq!(again.recording.samples, ing.recording.samples);
    }

    #[test]
    fn valid_eye_without_coordinates_is_malformed() {
        let mut text = String::new();
        for i in 0..20 {
            text.push_str(&format!(r#"{{"t_ms":{i},"lx":1,"ly":1,"rx":2,"ry":2,"lv":true,"rv":true}}"#));
            text.push('\n');
        }
        text.push_str(r#"{"t_ms":100,"lx":1,"lv":true,"rv":false}"#);
        let f = write_tmp(&text, ".jsonl");
        let ing = parse_recording(f.path(), GazeFormat::Jsonl, ScreenConfig::default()).unwrap();
        assert_eq!(ing.recording.samples.len(), 20);
        assert_eq!(ing.malformed_lines, vec![21]);
    }

    #[test]
    fn too_many_malformed_lines_fail_with_line_numbers() {
        let text = "{\"t_ms\":0,\"lv\":false,\"rv\":false}\nnot json\n{\"t_ms\":2,\"lv\":false,\"rv\":false}\n";
        let f = write_tmp(text, ".jsonl");
        match parse_recording(f.path(), GazeFormat::Jsonl, ScreenConfig::default()) {
            Err(Error::TooManyMalformed { lines, bad, total, .. }) => {
                assert_eq!((bad, total), (1, 3));
                assert_eq!(lines, vec![2]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_matches_jsonl() {
        let samples = vec![
            GazeSample {
                left_eye_mm: Some(Point3::new(-30.0, 1.0, 590.0)),
                right_eye_mm: Some(Point3::new(30.0, 1.0, 610.0)),
                ..GazeSample::binocular(0.0, Point2::new(1.5, 2.25), Point2::new(3.0, 4.0))
            },
            GazeSample::lost(16.0),
            GazeSample {
                right_valid: false,
                right_px: None,
                ..GazeSample::binocular(32.0, Point2::new(7.0, 8.0), Point2::new(0.0, 0.0))
            },
        ];
        let mut buf = Vec::new();
        write_recording(&samples, GazeFormat::Csv, &mut buf).unwrap();
        let f = write_tmp(std::str::from_utf8(&buf).unwrap(), ".csv");
        let ing = parse_recording(f.path(), GazeFormat::from_path(f.path()), ScreenConfig::default()).unwrap();
        assert_eq!(ing.recording.samples, samples);
    }

    #[test]
    fn screen_pitch() {
        let s = ScreenConfig::new(1680, 1050, 473.8, 296.1).unwrap();
        assert!((s.pixel_pitch_mm() - 473.8 / 1680.0).abs() < 1e-12);
        assert!((ScreenConfig::default().pixel_pitch_mm() - 0.283).abs() < 1e-9);
        assert!(ScreenConfig::new(0, 1, 1.0, 1.0).is_err());
        assert!(ScreenConfig::new(1, 1, -1.0, 1.0).is_err());
    }
}
