use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cuboidtrack::experiment::{
    ablate as run_ablation, evaluate_sequence, map_sequences, simulate_one, track_sequence, training_samples,
    ExperimentConfig, SequenceEvaluation,
};
use cuboidtrack::metrics::{aggregate, FrameMetrics, MetricReport};
use cuboidtrack::records::{read_jsonl, read_sequence, write_jsonl, PredictionRecord, SequenceRecord};
use rayon::prelude::*;
use serde::Serialize;

use crate::failure::Failure;

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    let dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::io(path, e))
}

fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), Failure> {
    write_jsonl(records, create(path)?).map_err(|e| Failure::at(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::io(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Failure::io(path, e))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in rows {
        w.serialize(r).map_err(|e| Failure::io(path, e))?;
    }
    w.flush().map_err(|e| Failure::io(path, e))
}

fn load_sequence(path: &Path) -> Result<Vec<SequenceRecord>, Failure> {
    let file = File::open(path).map_err(|e| Failure::io(path, e))?;
    read_sequence(BufReader::new(file)).map_err(|e| Failure::at(path, e))
}

fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, Failure> {
    let file = File::open(path).map_err(|e| Failure::io(path, e))?;
    read_jsonl(BufReader::new(file)).map_err(|e| Failure::at(path, e))
}

/// Runs `f` on every item in parallel; the first failure in input order wins.
fn for_each<I: Sync, T: Send>(
    items: &[I],
    f: impl Fn(&I) -> Result<T, Failure> + Sync + Send,
) -> Result<Vec<T>, Failure> {
    let results: Vec<Result<T, Failure>> = items.par_iter().map(f).collect();
    results.into_iter().collect()
}

/// Writes to stdout, ignoring a closed pipe.
pub fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "sequence".into(), |s| s.to_string_lossy().into_owned())
}

/// `seq_0003.jsonl` → `pred_0003.jsonl`; other names get a `pred_` prefix.
pub fn prediction_name(sequence: &Path) -> String {
    let s = stem(sequence);
    format!("pred_{}.jsonl", s.strip_prefix("seq_").unwrap_or(&s))
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let dir = out_dir(cfg)?;
    let seed = cfg.seed()?;
    let suite = map_sequences(cfg.sequences, |i| simulate_one(cfg, i))?;
    for (i, seq) in suite.iter().enumerate() {
        write_records(&dir.join(format!("seq_{i:04}.jsonl")), seq)?;
        if cfg.training_inputs {
            let samples = training_samples(seq, &cfg.noise, cfg.sequence_seed(i)?)?;
            write_records(&dir.join(format!("training_{i:04}.jsonl")), &samples)?;
        }
    }
    write_json(&dir.join("config.json"), cfg)?;
    log::info!("simulated {} sequences with seed {seed}", suite.len());
    emit(&format!("wrote {} sequences to {}\n", suite.len(), dir.display()));
    Ok(())
}

pub fn track(cfg: &ExperimentConfig, sequences: &[PathBuf]) -> Result<(), Failure> {
    let dir = out_dir(cfg)?;
    let seed = cfg.seed()?;
    let written = for_each(sequences, |path| {
        let records = load_sequence(path)?;
        let preds = track_sequence(&records, &cfg.tracker, &cfg.detector, seed).map_err(|e| Failure::at(path, e))?;
        let target = dir.join(prediction_name(path));
        write_records(&target, &preds)?;
        log::info!("{}: {} frames, {} predictions", path.display(), records.len(), preds.len());
        Ok(target)
    })?;
    emit(&written.iter().map(|p| format!("{}\n", p.display())).collect::<String>());
    Ok(())
}

#[derive(Debug, Serialize)]
struct ReportRow<'a> {
    sequence: &'a str,
    object: String,
    frames: usize,
    ap_iou50: f64,
    mean_pixel_error: Option<f64>,
    ap_azimuth15: f64,
    ap_elevation10: f64,
    consistency: f64,
}

impl<'a> ReportRow<'a> {
    fn new(sequence: &'a str, object: String, frames: usize, r: &MetricReport) -> Self {
        Self {
            sequence,
            object,
            frames,
            ap_iou50: r.ap_iou50,
            mean_pixel_error: r.mean_pixel_error,
            ap_azimuth15: r.ap_azimuth15,
            ap_elevation10: r.ap_elevation10,
            consistency: r.consistency,
        }
    }
}

#[derive(Debug, Serialize)]
struct SeriesRow<'a> {
    sequence: &'a str,
    object: u64,
    frame: usize,
    iou: f64,
    pixel_error: Option<f64>,
    azimuth_error_deg: Option<f64>,
    elevation_error_deg: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ObjectReport {
    id: u64,
    frames: usize,
    report: MetricReport,
}

#[derive(Debug, Serialize)]
struct SequenceReport {
    sequence: String,
    objects: Vec<ObjectReport>,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    overall: MetricReport,
    sequences: Vec<SequenceReport>,
}

pub fn eval(
    cfg: &ExperimentConfig,
    sequences: &[PathBuf],
    predictions: &[PathBuf],
    emit_series: bool,
) -> Result<(), Failure> {
    if sequences.len() != predictions.len() {
        return Err(Failure::config(format!(
            "{} sequence files but {} prediction files",
            sequences.len(),
            predictions.len()
        )));
    }
    let dir = out_dir(cfg)?;
    let pairs: Vec<(&PathBuf, &PathBuf)> = sequences.iter().zip(predictions).collect();
    let evals: Vec<SequenceEvaluation> = for_each(&pairs, |&(seq, pred)| {
        let records = load_sequence(seq)?;
        let preds = load_predictions(pred)?;
        evaluate_sequence(&records, &preds, &cfg.metrics).map_err(|e| Failure::at(pred, e))
    })?;

    let names: Vec<String> = sequences.iter().map(|p| stem(p)).collect();
    let weighted: Vec<(MetricReport, usize)> =
        evals.iter().flat_map(|e| e.objects.iter().map(|(_, r, f)| (*r, f.len()))).collect();
    let overall = aggregate(&weighted).ok_or_else(|| Failure::from(cuboidtrack::Error::EmptyInput))?;

    let mut rows = Vec::new();
    let mut series = Vec::new();
    for (name, e) in names.iter().zip(&evals) {
        for (id, r, frames) in &e.objects {
            rows.push(ReportRow::new(name, id.to_string(), frames.len(), r));
            series.extend(frames.iter().enumerate().map(|(f, m): (usize, &FrameMetrics)| SeriesRow {
                sequence: name,
                object: *id,
                frame: f,
                iou: m.iou,
                pixel_error: m.pixel_error,
                azimuth_error_deg: m.azimuth_error_deg,
                elevation_error_deg: m.elevation_error_deg,
            }));
        }
    }
    let total_frames = weighted.iter().map(|(_, n)| n).sum();
    rows.push(ReportRow::new("all", "all".into(), total_frames, &overall));

    let report = EvalReport {
        overall,
        sequences: names
            .iter()
            .zip(&evals)
            .map(|(name, e)| SequenceReport {
                sequence: name.clone(),
                objects: e
                    .objects
                    .iter()
                    .map(|(id, r, f)| ObjectReport { id: *id, frames: f.len(), report: *r })
                    .collect(),
            })
            .collect(),
    };
    write_json(&dir.join("report.json"), &report)?;
    write_csv(&dir.join("report.csv"), &rows)?;
    if emit_series {
        write_csv(&dir.join("series.csv"), &series)?;
    }
    print_table(&[("all".to_string(), overall)]);
    Ok(())
}

#[derive(Debug, Serialize)]
struct AblationCsvRow<'a> {
    setting: &'a str,
    ap_iou50: f64,
    mean_pixel_error: Option<f64>,
    ap_azimuth15: f64,
    ap_elevation10: f64,
    consistency: f64,
}

pub fn ablate(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let dir = out_dir(cfg)?;
    let rows = run_ablation(cfg)?;
    let csv_rows: Vec<AblationCsvRow> = rows
        .iter()
        .map(|r| AblationCsvRow {
            setting: &r.name,
            ap_iou50: r.report.ap_iou50,
            mean_pixel_error: r.report.mean_pixel_error,
            ap_azimuth15: r.report.ap_azimuth15,
            ap_elevation10: r.report.ap_elevation10,
            consistency: r.report.consistency,
        })
        .collect();
    write_csv(&dir.join("ablation.csv"), &csv_rows)?;
    write_json(&dir.join("ablation.json"), &rows)?;
    print_table(&rows.iter().map(|r| (r.name.clone(), r.report)).collect::<Vec<_>>());
    Ok(())
}

fn print_table(rows: &[(String, MetricReport)]) {
    let mut text = format!(
        "{:<16} {:>8} {:>10} {:>8} {:>8} {:>11}\n",
        "setting", "AP@0.5", "pixel err", "AP az", "AP el", "consistency"
    );
    for (name, r) in rows {
        let px = r.mean_pixel_error.map_or_else(|| "-".to_string(), |p| format!("{p:.5}"));
        text += &format!(
            "{name:<16} {:>8.4} {px:>10} {:>8.4} {:>8.4} {:>11.4}\n",
            r.ap_iou50, r.ap_azimuth15, r.ap_elevation10, r.consistency
        );
    }
    emit(&text);
}
