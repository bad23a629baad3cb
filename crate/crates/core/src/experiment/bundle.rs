//! On-disk experiment bundles: CSV tables plus a manifest of their schemas.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{execute, ExperimentOutcome, RunOutcome};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{deviation_of_records, DeviationReport, NormPartition, PredictedCurves};
use crate::net::TrainingRecord;
use crate::theory::NormCurves;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub kind: String,
    /// Column names; empty for headerless matrices and text files.
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub runs: Vec<String>,
    pub artifacts: Vec<Artifact>,
}

pub const MANIFEST_FILE: &str = "manifest.toml";

struct Writer {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Writer {
    fn put(&mut self, rel: &str, kind: &str, columns: &[String], body: &str) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(Artifact {
            path: rel.to_string(),
            kind: kind.to_string(),
            columns: columns.to_vec(),
        });
        Ok(())
    }

    fn table(&mut self, rel: &str, kind: &str, columns: Vec<String>, rows: Vec<Vec<String>>) -> Result<()> {
        let body = csv_text(&columns, &rows);
        self.put(rel, kind, &columns, &body)
    }
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if !header.is_empty() {
        w.write_record(header).expect("writing to memory");
    }
    for r in rows {
        w.write_record(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is utf-8")
}

pub(crate) fn f(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let rows: Vec<Vec<String>> = m.row_iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect();
    csv_text(&[], &rows)
}

pub fn dataset_meta(d: &Dataset) -> String {
    let p = &d.params;
    let l = &d.layout;
    let range = |r: &std::ops::Range<usize>| format!("{}..{}", r.start, r.end);
    let mut s = String::new();
    let _ = writeln!(s, "n_x = {}", p.n_x);
    let _ = writeln!(s, "n_y = {}", p.n_y);
    let _ = writeln!(s, "k_x = {}", p.k_x);
    let _ = writeln!(s, "k_y = {}", p.k_y);
    let _ = writeln!(s, "r = {}", p.r);
    let _ = writeln!(s, "patterns = {}", d.patterns());
    let _ = writeln!(s, "comp_input_rows = {}", range(&l.comp_input_rows));
    let _ = writeln!(s, "noncomp_input_rows = {}", range(&l.noncomp_input_rows));
    let _ = writeln!(s, "comp_output_rows = {}", range(&l.comp_output_rows));
    let _ = writeln!(s, "noncomp_output_rows = {}", range(&l.noncomp_output_rows));
    let feats: Vec<String> = d.selected_features.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(s, "selected_features = {}", feats.join(","));
    s
}

/// Writes `input.csv`, `output.csv` and `meta.txt` into `dir`.
pub fn write_dataset(d: &Dataset, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("input.csv", matrix_csv(&d.input)),
        ("output.csv", matrix_csv(&d.output)),
        ("meta.txt", dataset_meta(d)),
    ];
    let mut out = Vec::new();
    for (name, body) in files {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        out.push(p);
    }
    Ok(out)
}

/// Reads a headerless numeric CSV written by [`matrix_csv`].
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec.iter().map(|s| parse_f64(path, s)).collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(format_err(path, "ragged rows"));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, |r| r.len());
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| format_err(path, format!("not a number: `{s}`")))
}

pub fn history_columns(n_modes: usize) -> Vec<String> {
    let mut c = strings(&["epoch", "loss", "test_loss"]);
    c.extend((1..=n_modes).map(|i| format!("mode_{i}")));
    c.extend(NormCurves::IDS.iter().map(|id| format!("norm_{id}")));
    c
}

pub fn history_rows(records: &[TrainingRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|r| {
            let mut row = vec![r.epoch.to_string(), f(r.loss), opt(r.test_loss)];
            row.extend(r.modes.iter().map(|&v| f(v)));
            row.extend(r.norms.to_array().iter().map(|&v| f(v)));
            row
        })
        .collect()
}

pub const PREDICTED_COLUMNS: [&str; 3] = ["t", "id", "value"];

/// Long-format rows `(t, id, value)` for every mode and norm curve.
pub fn predicted_rows(p: &PredictedCurves) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (i, m) in p.modes.iter().enumerate() {
        let id = format!("mode_{}", i + 1);
        rows.extend(p.times.iter().zip(m).map(|(&t, &v)| vec![f(t), id.clone(), f(v)]));
    }
    for (id, series) in NormCurves::IDS.iter().zip(p.norms.series()) {
        let id = format!("norm_{id}");
        rows.extend(
            p.norms
                .times
                .iter()
                .zip(series)
                .map(|(&t, &v)| vec![f(t), id.clone(), f(v)]),
        );
    }
    rows
}

pub fn predicted_csv(p: &PredictedCurves) -> String {
    csv_text(&strings(&PREDICTED_COLUMNS), &predicted_rows(p))
}

fn deviation_rows(d: &DeviationReport) -> Vec<Vec<String>> {
    d.all()
        .map(|s| vec![s.id.clone(), f(s.max_abs), s.epoch.to_string()])
        .collect()
}

fn write_run(w: &mut Writer, run: &RunOutcome) -> Result<()> {
    let dir = &run.spec.label;
    let n_modes = run.mean.first().map_or(0, |r| r.modes.len());
    w.table(
        &format!("{dir}/history.csv"),
        "history-mean",
        history_columns(n_modes),
        history_rows(&run.mean),
    )?;
    w.table(
        &format!("{dir}/history_std.csv"),
        "history-std",
        history_columns(n_modes),
        history_rows(&run.std),
    )?;
    if let Some(p) = &run.predicted {
        w.table(
            &format!("{dir}/predicted.csv"),
            "predicted",
            strings(&PREDICTED_COLUMNS),
            predicted_rows(p),
        )?;
    }
    if let Some(d) = &run.deviation {
        w.put(
            &format!("{dir}/deviation.txt"),
            "deviation-text",
            &[],
            &d.to_key_value(),
        )?;
        w.table(
            &format!("{dir}/deviation.csv"),
            "deviation",
            strings(&["id", "max_abs", "epoch"]),
            deviation_rows(d),
        )?;
    }
    let rows = run
        .repeats
        .iter()
        .map(|r| {
            vec![
                r.repeat.to_string(),
                r.seed.to_string(),
                r.train_full_rank.map(|b| b.to_string()).unwrap_or_default(),
                f(r.initial_loss),
                f(r.final_loss),
                opt(r.initial_test_loss),
                opt(r.final_test_loss),
            ]
        })
        .collect();
    w.table(
        &format!("{dir}/repeats.csv"),
        "repeats",
        strings(&[
            "repeat",
            "seed",
            "train_full_rank",
            "initial_loss",
            "final_loss",
            "initial_test_loss",
            "final_test_loss",
        ]),
        rows,
    )
}

pub const SUMMARY_COLUMNS: [&str; 14] = [
    "label",
    "arch",
    "rule",
    "final_loss",
    "initial_test_loss",
    "final_test_loss",
    "final_test_loss_full_rank",
    "full_rank_repeats",
    "norm_comp_comp",
    "norm_noncomp_comp",
    "norm_comp_noncomp",
    "norm_noncomp_noncomp",
    "verdict",
    "max_mode_deviation",
];

/// Writes a finished experiment to `dir` and returns its manifest.
pub fn write_bundle(outcome: &ExperimentOutcome, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = Writer {
        root: dir.to_path_buf(),
        artifacts: Vec::new(),
    };
    w.put("config.toml", "config", &[], &outcome.config.to_toml_string()?)?;

    if let Some(d) = &outcome.dataset {
        w.put("dataset/input.csv", "matrix", &[], &matrix_csv(&d.input))?;
        w.put("dataset/output.csv", "matrix", &[], &matrix_csv(&d.output))?;
        w.put("dataset/meta.txt", "dataset-meta", &[], &dataset_meta(d))?;
    }
    for run in &outcome.runs {
        write_run(&mut w, run)?;
    }
    if !outcome.runs.is_empty() {
        let mut cols = strings(&SUMMARY_COLUMNS);
        cols.push("max_norm_deviation".into());
        let rows = outcome
            .runs
            .iter()
            .map(|r| {
                let s = &r.summary;
                let mut row = vec![
                    s.label.clone(),
                    r.spec.arch.to_string(),
                    r.spec.rule.to_string(),
                    f(s.final_loss),
                    opt(s.initial_test_loss),
                    opt(s.final_test_loss),
                    opt(s.final_test_loss_full_rank),
                    s.full_rank_repeats.map(|n| n.to_string()).unwrap_or_default(),
                ];
                row.extend(s.final_norms.to_array().iter().map(|&v| f(v)));
                row.push(s.verdict.to_string());
                row.push(opt(s.max_mode_deviation));
                row.push(opt(s.max_norm_deviation));
                row
            })
            .collect();
        w.table("summary.csv", "summary", cols, rows)?;
    }
    if !outcome.rank.is_empty() {
        let rows = outcome
            .rank
            .iter()
            .map(|r| {
                vec![
                    r.n_features.to_string(),
                    r.sample_size.to_string(),
                    f(r.estimate),
                    f(r.std_error),
                    opt(r.exact),
                ]
            })
            .collect();
        w.table(
            "rank.csv",
            "rank",
            strings(&[
                "n_features",
                "sample_size",
                "estimate",
                "std_error",
                "exact_if_available",
            ]),
            rows,
        )?;
    }

    let manifest = Manifest {
        name: outcome.config.name.clone(),
        runs: outcome.runs.iter().map(|r| r.spec.label.clone()).collect(),
        artifacts: w.artifacts,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::config("manifest", e.to_string()))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Executes `config` and writes the bundle to `dir`.
pub fn run(config: &ExperimentConfig, dir: &Path) -> Result<(ExperimentOutcome, Manifest)> {
    let outcome = execute(config)?;
    let manifest = write_bundle(&outcome, dir)?;
    Ok((outcome, manifest))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| format_err(&path, e.to_string()))?;
    for a in &m.artifacts {
        if !dir.join(&a.path).is_file() {
            return Err(format_err(&path, format!("listed artifact `{}` is missing", a.path)));
        }
    }
    Ok(m)
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = rdr
        .records()
        .map(|r| {
            r.map(|r| r.iter().map(str::to_string).collect())
                .map_err(|e| csv_err(path, e))
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

/// Parses a `history.csv` back into records.
pub fn read_history(path: &Path) -> Result<Vec<TrainingRecord>> {
    let (header, rows) = read_table(path)?;
    let n_modes = header.iter().filter(|h| h.starts_with("mode_")).count();
    if header != history_columns(n_modes) {
        return Err(format_err(path, "unexpected history columns"));
    }
    rows.iter()
        .map(|row| {
            let num = |i: usize| parse_f64(path, &row[i]);
            let epoch = row[0]
                .parse()
                .map_err(|_| format_err(path, format!("bad epoch `{}`", row[0])))?;
            let test_loss = if row[2].is_empty() { None } else { Some(num(2)?) };
            let modes = (0..n_modes).map(|i| num(3 + i)).collect::<Result<_>>()?;
            let b = 3 + n_modes;
            Ok(TrainingRecord {
                epoch,
                loss: num(1)?,
                test_loss,
                modes,
                norms: NormPartition::from_array([num(b)?, num(b + 1)?, num(b + 2)?, num(b + 3)?]),
            })
        })
        .collect()
}

/// Parses a long-format `predicted.csv`.
pub fn read_predicted(path: &Path) -> Result<PredictedCurves> {
    let (header, rows) = read_table(path)?;
    if header != strings(&PREDICTED_COLUMNS) {
        return Err(format_err(path, "unexpected predicted columns"));
    }
    let mut out = PredictedCurves::default();
    let mut mode_index: Vec<usize> = Vec::new();
    for row in &rows {
        let t = parse_f64(path, &row[0])?;
        let v = parse_f64(path, &row[2])?;
        let id = row[1].as_str();
        if let Some(i) = id.strip_prefix("mode_") {
            let i: usize = i.parse().map_err(|_| format_err(path, format!("bad id `{id}`")))?;
            if i == 0 {
                return Err(format_err(path, "mode ids start at 1"));
            }
            if out.modes.len() < i {
                out.modes.resize(i, Vec::new());
            }
            if i == 1 {
                out.times.push(t);
            }
            out.modes[i - 1].push(v);
            mode_index.push(i);
        } else {
            let n = &mut out.norms;
            let series = match id {
                "norm_comp_comp" => {
                    n.times.push(t);
                    &mut n.comp_comp
                }
                "norm_noncomp_comp" => &mut n.noncomp_comp,
                "norm_comp_noncomp" => &mut n.comp_noncomp,
                "norm_noncomp_noncomp" => &mut n.noncomp_noncomp,
                _ => return Err(format_err(path, format!("unknown id `{id}`"))),
            };
            series.push(v);
        }
    }
    if out.modes.is_empty() {
        out.times = out.norms.times.clone();
    }
    let len = out.times.len();
    let consistent = out.modes.iter().all(|m| m.len() == len)
        && out.norms.series().iter().all(|s| s.len() == len)
        && out.norms.times.len() == len;
    if !consistent {
        return Err(format_err(path, "curves have different lengths"));
    }
    Ok(out)
}

/// Recomputes the deviation report of one run directory of a bundle.
pub fn compare_run_dir(dir: &Path) -> Result<DeviationReport> {
    let history = read_history(&dir.join("history.csv"))?;
    let predicted = read_predicted(&dir.join("predicted.csv"))?;
    deviation_of_records(&history, &predicted)
}
