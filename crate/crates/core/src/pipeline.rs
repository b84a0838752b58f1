//! End-to-end compositions used by the command line and the tests.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::annotate::{assign_windows, LabeledSegment, DEFAULT_COVERAGE};
use crate::dataset::{FeatureRow, FeatureTable};
use crate::error::{Error, Result};
use crate::evaluation::{lopo_eval, ClassifierKind, EvalConfig, GridReport};
use crate::features::{extract_recording, feature_manifest, generate_windows, ExtractConfig, FeatureSubset};
use crate::forest::{train_forest, tune_depth, Classifier, ForestModel, ForestParams, Prediction, DEFAULT_TREES, DEPTH_GRID};
use crate::gaze::{
    one_euro_filter, parse_recording, read_screen_config, resample, GazeFormat, OneEuroParams, Recording, ScreenConfig,
    DEFAULT_RATE_HZ,
};
use crate::synth::{generate, participant_specs, write_synth};

/// Resample to 60 Hz and smooth.
pub fn prepare(rec: &Recording, filter: OneEuroParams) -> Result<Recording> {
    let mut r = one_euro_filter(&resample(rec, DEFAULT_RATE_HZ)?, filter);
    r.nominal_rate_hz = DEFAULT_RATE_HZ;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowOptions {
    pub size_ms: f64,
    pub step_ms: f64,
    pub coverage: f64,
    /// Ignore spontaneous on-task segments that followed a slow deblur.
    pub engaged_only: bool,
}

impl WindowOptions {
    pub fn new(size_ms: f64, step_divisor: f64) -> Self {
        Self {
            size_ms,
            step_ms: size_ms / step_divisor,
            coverage: DEFAULT_COVERAGE,
            engaged_only: false,
        }
    }
}

/// Feature rows for every window of a prepared recording, labelled from
/// `segments` where one covers the window.
pub fn extract_table(
    rec: &Recording,
    segments: &[LabeledSegment],
    opts: &WindowOptions,
    config: &ExtractConfig,
) -> Result<FeatureTable> {
    if !(opts.size_ms > 0.0 && opts.step_ms > 0.0) {
        return Err(Error::InvalidArgument("window size and step must be positive".into()));
    }
    let kept: Vec<LabeledSegment> = segments
        .iter()
        .filter(|s| !(opts.engaged_only && s.engaged == Some(false)))
        .cloned()
        .collect();
    let windows = generate_windows(rec, opts.size_ms, opts.step_ms);
    let labels = assign_windows(&windows, &kept, opts.coverage);
    let vectors = extract_recording(rec, opts.size_ms, opts.step_ms, config);
    let mut table = FeatureTable::new(feature_manifest().to_vec());
    for (fv, seg) in vectors.iter().zip(labels) {
        let label = seg.map(|i| kept[i].class.as_str().to_string());
        table.push(FeatureRow::from_vector(&rec.participant_id, fv, label))?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DepthChoice {
    Fixed(Option<usize>),
    Tune(Vec<Option<usize>>),
}

impl Default for DepthChoice {
    fn default() -> Self {
        DepthChoice::Tune(DEPTH_GRID.to_vec())
    }
}

/// Train on the usable rows of `table` restricted to `subset`, with labels
/// reduced to internal thought versus on-task.
pub fn train_from_table(
    table: &FeatureTable,
    subset: FeatureSubset,
    n_trees: usize,
    seed: u64,
    depth: &DepthChoice,
) -> Result<ForestModel> {
    let t = table.subset(subset)?;
    let (x, y): (Vec<Vec<f64>>, Vec<String>) = t
        .usable()
        .map(|r| (r.values.clone(), crate::annotate::binarize(r.label.as_deref().unwrap_or("")).to_string()))
        .unzip();
    let params = ForestParams {
        n_trees,
        seed,
        ..Default::default()
    };
    let max_depth = match depth {
        DepthChoice::Fixed(d) => *d,
        DepthChoice::Tune(grid) => tune_depth(&x, &y, &t.feature_names, grid, &params)?,
    };
    train_forest(&x, &y, &t.feature_names, &ForestParams { max_depth, ..params })
}

/// Predict every row of `table`, selecting the model's columns by name.
pub fn predict_table(model: &ForestModel, table: &FeatureTable) -> Result<Vec<Prediction>> {
    let cols = table.columns(&model.feature_manifest)?;
    table
        .rows
        .iter()
        .map(|r| model.predict(&cols.iter().map(|&c| r.values[c]).collect::<Vec<_>>()))
        .collect()
}

/// Prepared recordings with their ground truth for `n` pseudo-participants.
pub fn synth_participants(n: usize, seed: u64, duration_ms: f64) -> Result<Vec<(Recording, Vec<LabeledSegment>)>> {
    participant_specs(n, seed, duration_ms)
        .iter()
        .map(|spec| {
            let (rec, segs) = generate(spec)?;
            Ok((prepare(&rec, OneEuroParams::default())?, segs))
        })
        .collect()
}

/// One labelled feature table over several prepared recordings.
pub fn table_for(
    recordings: &[(Recording, Vec<LabeledSegment>)],
    opts: &WindowOptions,
) -> Result<FeatureTable> {
    let mut table = FeatureTable::new(feature_manifest().to_vec());
    for (rec, segs) in recordings {
        table.extend(extract_table(rec, segs, opts, &ExtractConfig::for_recording(rec))?)?;
    }
    Ok(table)
}

pub const SCREEN_FILE: &str = "screen.json";
pub const SEGMENTS_SUFFIX: &str = "segments.json";

/// Sidecar holding the segments of `<stem>.jsonl`.
pub fn segments_path(gaze: &Path) -> PathBuf {
    let stem = gaze.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    gaze.with_file_name(format!("{stem}.{SEGMENTS_SUFFIX}"))
}

pub fn read_segments(path: &Path) -> Result<Vec<LabeledSegment>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
}

/// `screen.json` in `dir`, or the default panel when absent.
pub fn dir_screen(dir: &Path) -> Result<ScreenConfig> {
    let p = dir.join(SCREEN_FILE);
    if p.exists() {
        read_screen_config(&p)
    } else {
        Ok(ScreenConfig::default())
    }
}

/// Every `<participant>.jsonl` in `dir` with its segments sidecar, prepared
/// and sorted by file name.
pub fn read_dataset_dir(dir: &Path) -> Result<Vec<(Recording, Vec<LabeledSegment>)>> {
    let screen = dir_screen(dir)?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Dataset(format!("{}: no .jsonl recordings", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let rec = parse_recording(p, GazeFormat::Jsonl, screen)?.recording;
            let segs = read_segments(&segments_path(p))?;
            Ok((prepare(&rec, OneEuroParams::default())?, segs))
        })
        .collect()
}

/// Writes `screen.json`, `specs.json` and one recording plus segments
/// sidecar per participant.
pub fn write_synth_dataset(dir: &Path, n: usize, seed: u64, duration_ms: f64) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let specs = participant_specs(n, seed, duration_ms);
    let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| Error::io(p, e));
    let mut written = Vec::new();
    for spec in &specs {
        let (rec, segs) = generate(spec)?;
        let gaze = dir.join(format!("{}.jsonl", spec.participant_id));
        let side = segments_path(&gaze);
        write_synth(&rec, &segs, &mut create(&gaze)?, &mut create(&side)?)?;
        written.push(gaze);
    }
    let screen = specs.first().map_or_else(ScreenConfig::default, |s| s.screen);
    let json = |v: String| v + "\n";
    let p = dir.join(SCREEN_FILE);
    fs::write(&p, json(serde_json::to_string_pretty(&screen)?)).map_err(|e| Error::io(&p, e))?;
    let p = dir.join("specs.json");
    fs::write(&p, json(serde_json::to_string_pretty(&specs)?)).map_err(|e| Error::io(&p, e))?;
    Ok(written)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridParams {
    pub window_ms: Vec<f64>,
    pub subsets: Vec<FeatureSubset>,
    pub step_divisor: f64,
    pub engaged_only: bool,
    pub n_trees: usize,
    pub seed: u64,
    pub depth: DepthChoice,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            window_ms: vec![250.0, 500.0, 750.0, 1000.0],
            subsets: FeatureSubset::ALL.to_vec(),
            step_divisor: 4.0,
            engaged_only: false,
            n_trees: DEFAULT_TREES,
            seed: 0,
            depth: DepthChoice::default(),
        }
    }
}

/// Forest per window size and subset, plus one majority baseline per
/// window size.
pub fn eval_grid(
    data: &[(Recording, Vec<LabeledSegment>)],
    aux: Option<&[(Recording, Vec<LabeledSegment>)]>,
    params: &GridParams,
) -> Result<GridReport> {
    let depth_grid = match &params.depth {
        DepthChoice::Fixed(d) => vec![*d],
        DepthChoice::Tune(g) => g.clone(),
    };
    let mut grid = GridReport::default();
    for &w in &params.window_ms {
        let opts = WindowOptions {
            engaged_only: params.engaged_only,
            ..WindowOptions::new(w, params.step_divisor)
        };
        let table = table_for(data, &opts)?;
        let aux_table = aux.map(|a| table_for(a, &opts)).transpose()?;
        let base = EvalConfig {
            window_ms: w,
            subset: FeatureSubset::Full,
            classifier: ClassifierKind::Forest,
            n_trees: params.n_trees,
            seed: params.seed,
            depth_grid: depth_grid.clone(),
        };
        for &subset in &params.subsets {
            grid.reports.push(lopo_eval(&table, aux_table.as_ref(), &EvalConfig { subset, ..base.clone() })?);
        }
        let zeror = EvalConfig {
            classifier: ClassifierKind::ZeroR,
            ..base
        };
        grid.reports.push(lopo_eval(&table, aux_table.as_ref(), &zeror)?);
    }
    Ok(grid)
}
