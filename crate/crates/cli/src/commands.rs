use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use verge_collector::CollectorConfig;
use verge_core::annotate::{deblur_histogram, derive_labels, make_schedule, pair_events, parse_event_log, LabelParams};
use verge_core::dataset::{derive_seed, FeatureTable};
use verge_core::features::ExtractConfig;
use verge_core::forest::ForestModel;
use verge_core::gaze::{
    parse_recording, parse_sample_line, read_screen_config, resample, GazeFormat, OneEuroParams, Recording, ScreenConfig,
    DEFAULT_RATE_HZ,
};
use verge_core::pipeline::{
    eval_grid, extract_table, predict_table, prepare, read_dataset_dir, read_segments, train_from_table,
    write_synth_dataset, GridParams, WindowOptions,
};
use verge_core::realtime::{replay, AlertEvent, Engine, EngineConfig};

use crate::args::*;

/// `path`, or stdout when absent.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn screen(path: Option<&Path>) -> Result<ScreenConfig> {
    match path {
        Some(p) => read_screen_config(p).with_context(|| format!("reading screen config {}", p.display())),
        None => Ok(ScreenConfig::default()),
    }
}

fn read_gaze(input: &GazeInput) -> Result<Recording> {
    let p = &input.gaze;
    let ing = parse_recording(p, GazeFormat::from_path(p), screen(input.screen.as_deref())?)
        .with_context(|| format!("reading gaze {}", p.display()))?;
    if !ing.malformed_lines.is_empty() {
        eprintln!("warning: {}: skipped malformed lines {:?}", p.display(), ing.malformed_lines);
    }
    Ok(ing.recording)
}

fn load_model(path: &Path) -> Result<ForestModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    ForestModel::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

fn load_table(path: &Path) -> Result<FeatureTable> {
    FeatureTable::load(path).with_context(|| format!("reading features {}", path.display()))
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let files = write_synth_dataset(&a.out, a.participants, a.seed, a.duration_ms)
        .with_context(|| format!("writing synthetic data to {}", a.out.display()))?;
    eprintln!("wrote {} recordings to {}", files.len(), a.out.display());
    Ok(())
}

pub fn extract(a: ExtractArgs) -> Result<()> {
    let mut rec = read_gaze(&a.input)?;
    if let Some(p) = a.participant {
        rec.participant_id = p;
    }
    let segs = match &a.segments {
        Some(p) => read_segments(p).with_context(|| format!("reading segments {}", p.display()))?,
        None => Vec::new(),
    };
    let rec = prepare(&rec, OneEuroParams::default())?;
    let cfg = ExtractConfig::for_recording(&rec);
    let mut table: Option<FeatureTable> = None;
    for &w in &a.window_ms {
        let opts = WindowOptions {
            engaged_only: a.engaged_only,
            ..WindowOptions::new(w, a.step_divisor)
        };
        let t = extract_table(&rec, &segs, &opts, &cfg)?;
        match &mut table {
            Some(all) => all.extend(t)?,
            None => table = Some(t),
        }
    }
    let table = table.context("no window sizes given")?;
    table.write_csv(output(a.out.as_deref())?)?;
    Ok(())
}

pub fn label(a: LabelArgs) -> Result<()> {
    let f = File::open(&a.events).with_context(|| format!("opening {}", a.events.display()))?;
    let ctx = || format!("labelling {}", a.events.display());
    let log = parse_event_log(BufReader::new(f)).with_context(ctx)?;
    let events = pair_events(&log).with_context(ctx)?;
    let params = LabelParams {
        t_d_ms: a.td_ms,
        t_r_ms: a.tr_ms,
        ..Default::default()
    };
    let segs = derive_labels(&events, &params).with_context(ctx)?;
    let mut out = output(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &segs)?;
    writeln!(out)?;
    out.flush()?;
    if let Some(p) = &a.histogram {
        let h = deblur_histogram(&events, a.bin_ms, &params)?;
        let mut out = output(Some(p))?;
        serde_json::to_writer_pretty(&mut out, &h)?;
        writeln!(out)?;
        out.flush()?;
    }
    Ok(())
}

pub fn schedule(a: ScheduleArgs) -> Result<()> {
    let s = make_schedule(&a.session, a.duration_ms, a.alpha, derive_seed(a.seed, &a.session))?;
    let mut out = output(a.out.as_deref())?;
    out.write_all(s.to_json().as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut table = load_table(&a.input)?;
    for p in &a.aux {
        table.extend(load_table(p)?).with_context(|| format!("pooling {}", p.display()))?;
    }
    let model = train_from_table(&table, a.features, a.trees, a.seed, &a.max_depth)?;
    fs::write(&a.out, model.to_json()?).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!(
        "trained {} trees on {} features, oob accuracy {:.3}",
        model.trees.len(),
        model.feature_manifest.len(),
        model.oob.unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let data = read_dataset_dir(&a.data_dir).with_context(|| format!("reading dataset {}", a.data_dir.display()))?;
    let aux = match &a.aux_dir {
        Some(d) => Some(read_dataset_dir(d).with_context(|| format!("reading dataset {}", d.display()))?),
        None => None,
    };
    let params = GridParams {
        window_ms: a.window_ms,
        subsets: a.features,
        step_divisor: a.step_divisor,
        engaged_only: a.engaged_only,
        n_trees: a.trees,
        seed: a.seed,
        depth: a.max_depth,
    };
    let grid = eval_grid(&data, aux.as_deref(), &params)?;
    let text = grid.to_text();
    print!("{text}");
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut json = serde_json::to_string_pretty(&grid)?;
        json.push('\n');
        fs::write(dir.join("report.json"), json)?;
        fs::write(dir.join("report.txt"), &text)?;
        grid.write_fold_csv(output(Some(&dir.join("folds.csv")))?)?;
    }
    Ok(())
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let table = load_table(&a.input)?;
    let preds = predict_table(&model, &table).with_context(|| format!("predicting {}", a.input.display()))?;
    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    w.write_record(["participant_id", "window_start_ms", "window_size_ms", "label", "score"])?;
    for (r, p) in table.rows.iter().zip(preds) {
        w.write_record([
            r.participant_id.clone(),
            r.window_start_ms.to_string(),
            r.window_size_ms.to_string(),
            p.label,
            p.score.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes each alert as one JSON line to stdout and an optional client.
struct AlertSink {
    stdout: io::Stdout,
    client: Option<TcpStream>,
}

impl AlertSink {
    fn emit(&mut self, a: &AlertEvent) -> Result<()> {
        let line = a.to_json_line();
        let mut out = self.stdout.lock();
        writeln!(out, "{line}")?;
        out.flush()?;
        if let Some(c) = &mut self.client {
            if writeln!(c, "{line}").is_err() {
                eprintln!("warning: alert client disconnected");
                self.client = None;
            }
        }
        Ok(())
    }
}

pub fn alert(a: AlertArgs) -> Result<()> {
    let model = Arc::new(load_model(&a.model)?);
    let client = match &a.alert_listen {
        Some(addr) => {
            let l = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            eprintln!("waiting for an alert client on {}", l.local_addr()?);
            Some(l.accept()?.0)
        }
        None => None,
    };
    let mut sink = AlertSink {
        stdout: io::stdout(),
        client,
    };
    let (engine, alerts) = match (&a.gaze, &a.tcp) {
        (Some(path), _) => {
            let rec = read_gaze(&GazeInput {
                gaze: path.clone(),
                screen: a.screen.clone(),
            })?;
            let stream = resample(&rec, DEFAULT_RATE_HZ)?;
            let mut engine = Engine::new(model.clone(), &model.feature_manifest, EngineConfig::new(ExtractConfig::for_recording(&stream)))?;
            let mut n = 0;
            for s in replay(&stream, a.speed) {
                if let Some(al) = engine.push_frame(s)?.and_then(|r| r.alert) {
                    sink.emit(&al)?;
                    n += 1;
                }
            }
            (engine, n)
        }
        (None, Some(addr)) => {
            let rec = Recording::new("live", screen(a.screen.as_deref())?, Vec::new());
            let mut engine = Engine::new(model.clone(), &model.feature_manifest, EngineConfig::new(ExtractConfig::for_recording(&rec)))?;
            let conn = TcpStream::connect(addr).with_context(|| format!("connecting to {addr}"))?;
            let mut n = 0;
            for (i, line) in BufReader::new(conn).lines().enumerate() {
                let line = line.with_context(|| format!("reading {addr}"))?;
                if line.trim().is_empty() {
                    continue;
                }
                let s = match parse_sample_line(&line) {
                    Ok(s) => s,
                    Err(msg) => {
                        eprintln!("warning: {addr} line {}: {msg}", i + 1);
                        continue;
                    }
                };
                if let Some(al) = engine.push_frame(s)?.and_then(|r| r.alert) {
                    sink.emit(&al)?;
                    n += 1;
                }
            }
            (engine, n)
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    eprintln!("{alerts} alerts, {} frames dropped", engine.dropped());
    Ok(())
}

pub fn serve(a: ServeArgs) -> Result<()> {
    eprintln!("collector on {} storing to {}", a.bind, a.data_dir.display());
    verge_collector::run(
        &a.bind,
        CollectorConfig {
            data_dir: a.data_dir,
            assets_dir: a.assets,
            seed: a.seed,
        },
    )
    .context("collector")
}
