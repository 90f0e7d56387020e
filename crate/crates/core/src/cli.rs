//! Reproducible batch experiments: `generate`, `train`, `evaluate` and
//! `ablate`.
//!
//! Each command reads one JSON [`ExperimentConfig`], does all of its work in
//! memory and only then writes its artifacts into the output directory, so a
//! failing run leaves no partial outputs behind. Every command is a pure
//! function of its config and seed.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::data::{
    fmt_f64, generate, meta_path, Dataset, DatasetKind, Normalization, Split, DEFAULT_FRACTIONS,
};
use crate::error::{Error, Result};
use crate::inference::EmbeddingIndex;
use crate::linalg::{pca_project, Matrix};
use crate::metrics::{self, MetricsReport, DEFAULT_K_CANDIDATES};
use crate::rmloss::sigma_serde;
use crate::trainer::{train, Mode, TrainConfig, TrainLogRecord};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Where the data comes from: exactly one of `generate` and `path`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSpec>,
    /// A CSV written by `generate`; relative paths are resolved against the
    /// config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Fraction of the training rows kept; validation and test rows are untouched.
    #[serde(default = "one")]
    pub train_fraction: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub kind: DatasetKind,
    pub n: usize,
    pub d_x: usize,
    #[serde(default)]
    pub noise_sd: f64,
    /// Train/val/test fractions.
    #[serde(default = "default_fractions")]
    pub split: [f64; 3],
    #[serde(default = "default_normalization")]
    pub normalization: Normalization,
}

fn default_fractions() -> [f64; 3] {
    DEFAULT_FRACTIONS
}

fn default_normalization() -> Normalization {
    Normalization::Zscore
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    #[serde(default = "default_k")]
    pub k_candidates: Vec<usize>,
}

fn default_k() -> Vec<usize> {
    DEFAULT_K_CANDIDATES.to_vec()
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            k_candidates: default_k(),
        }
    }
}

/// A `sigma` value that may be `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sigma(#[serde(with = "sigma_serde")] pub f64);

/// One-factor-at-a-time sweep around `train.loss`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSpec {
    #[serde(default = "default_sigmas")]
    pub sigmas: Vec<Sigma>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_mining")]
    pub mining: Vec<bool>,
}

fn default_sigmas() -> Vec<Sigma> {
    [0.25, 0.5, 1.0, 1.5, f64::INFINITY].map(Sigma).to_vec()
}

fn default_alphas() -> Vec<f64> {
    vec![0.0, 0.1, 0.2, 0.3]
}

fn default_mining() -> Vec<bool> {
    vec![true, false]
}

impl Default for AblationSpec {
    fn default() -> Self {
        Self {
            sigmas: default_sigmas(),
            alphas: default_alphas(),
            mining: default_mining(),
        }
    }
}

/// One experiment. `seed` drives data generation and training; it replaces
/// any seed given inside `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub metrics: MetricsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationSpec>,
}

impl ExperimentConfig {
    /// Parses, resolves relative paths against the file's directory, applies
    /// the seed override and validates.
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(p) = cfg.dataset.path.as_mut() {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                *p = base.join(&*p);
            }
        }
        cfg.resolve(seed)?;
        Ok(cfg)
    }

    /// Applies the seed override, copies the seed into `train` and checks
    /// every field.
    pub fn resolve(&mut self, seed: Option<u64>) -> Result<()> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(t) = self.train.as_mut() {
            t.seed = self.seed;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        match (&d.generate, &d.path) {
            (Some(g), None) => {
                if g.n < 10 {
                    return Err(Error::Config(format!(
                        "dataset.generate.n must be >= 10, got {}",
                        g.n
                    )));
                }
                if g.d_x < g.kind.label_dim() {
                    return Err(Error::Config(format!(
                        "{} needs d_x >= {}",
                        g.kind,
                        g.kind.label_dim()
                    )));
                }
                if !(g.noise_sd >= 0.0) || !g.noise_sd.is_finite() {
                    return Err(Error::Config(
                        "dataset.generate.noise_sd must be >= 0".into(),
                    ));
                }
            }
            (None, Some(p)) => {
                if !p.exists() {
                    return Err(Error::MissingPath(p.clone()));
                }
            }
            _ => {
                return Err(Error::Config(
                    "dataset needs exactly one of `generate` and `path`".into(),
                ))
            }
        }
        if !(d.train_fraction > 0.0 && d.train_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "dataset.train_fraction must be in (0, 1], got {}",
                d.train_fraction
            )));
        }
        if let Some(t) = &self.train {
            t.validate()?;
        }
        if self.metrics.k_candidates.is_empty() || self.metrics.k_candidates.contains(&0) {
            return Err(Error::Config(
                "metrics.k_candidates must be non-empty and positive".into(),
            ));
        }
        if let Some(a) = &self.ablation {
            if a.sigmas.iter().any(|s| !(s.0 > 0.0))
                || a.alphas.iter().any(|v| !(*v >= 0.0) || !v.is_finite())
            {
                return Err(Error::Config(
                    "ablation needs sigma > 0 and finite alpha >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    fn train_config(&self) -> Result<&TrainConfig> {
        self.train
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a `train` section".into()))
    }

    /// The dataset described by the config, after optional subsampling.
    pub fn dataset(&self) -> Result<Dataset> {
        let full = self.full_dataset()?;
        if self.dataset.train_fraction < 1.0 {
            full.subsample_train(self.dataset.train_fraction, self.seed)
        } else {
            Ok(full)
        }
    }

    fn full_dataset(&self) -> Result<Dataset> {
        match (&self.dataset.generate, &self.dataset.path) {
            (Some(g), _) => {
                let mut ds = generate(g.kind, g.n, g.d_x, g.noise_sd, self.seed)?;
                if g.split != DEFAULT_FRACTIONS {
                    ds = ds.resplit(&g.split, self.seed)?;
                }
                if g.normalization != Normalization::Zscore {
                    ds = ds.renormalized(g.normalization)?;
                }
                Ok(ds)
            }
            (None, Some(p)) => Dataset::load(p),
            (None, None) => Err(Error::Config("dataset has no source".into())),
        }
    }
}

/// Files to write, relative to the output directory.
#[derive(Debug, Default)]
pub struct Artifacts(pub Vec<(PathBuf, String)>);

impl Artifacts {
    fn add(&mut self, name: impl Into<PathBuf>, content: String) {
        self.0.push((name.into(), content));
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        for (name, content) in &self.0 {
            let path = out.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, content)?;
        }
        Ok(())
    }
}

fn json(v: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

// ---------------------------------------------------------------- generate

pub fn run_generate(cfg: &ExperimentConfig) -> Result<(Dataset, Artifacts)> {
    let ds = cfg.dataset()?;
    let mut art = Artifacts::default();
    art.add("dataset.csv", ds.to_csv_string()?);
    art.add(meta_path(Path::new("dataset.csv")), json(&ds.meta())?);
    Ok((ds, art))
}

pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let (ds, art) = run_generate(cfg)?;
    art.write(out)?;
    Ok(format!(
        "wrote {} rows (d_x={}, d_y={}; train/val/test {}/{}/{}) to {}",
        ds.len(),
        ds.d_x(),
        ds.d_y(),
        ds.indices(Split::Train).len(),
        ds.indices(Split::Val).len(),
        ds.indices(Split::Test).len(),
        out.join("dataset.csv").display()
    ))
}

// ------------------------------------------------------------------- train

/// Result of [`run_train`].
#[derive(Debug)]
pub struct TrainRun {
    pub checkpoint: Checkpoint,
    pub log: Vec<TrainLogRecord>,
    pub artifacts: Artifacts,
}

pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainRun> {
    let tcfg = cfg.train_config()?;
    let ds = cfg.dataset()?;
    let outcome = train(&ds, tcfg)?;
    let ck = Checkpoint::from_outcome(
        &outcome,
        tcfg.mode,
        &ds.norm_params,
        serde_json::to_value(cfg)?,
    );

    let mut art = Artifacts::default();
    art.add("checkpoint.json", ck.to_json()?);
    art.add("train_log.jsonl", log_jsonl(&outcome.log)?);
    art.add("train_curve.csv", train_curve_csv(&outcome.log)?);
    if let Some(choice) = &outcome.radius {
        art.add("radius.json", json(choice)?);
    }
    art.add("config.json", json(cfg)?);
    Ok(TrainRun {
        checkpoint: ck,
        log: outcome.log,
        artifacts: art,
    })
}

pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let run = run_train(cfg)?;
    run.artifacts.write(out)?;
    let ck = &run.checkpoint;
    let radius = ck
        .radius
        .map(|r| format!(", radius {r:.6}"))
        .unwrap_or_default();
    Ok(format!(
        "{} training: best validation MAE {:.6} at iteration {}{radius}; artifacts in {}",
        ck.mode.as_str(),
        ck.best_val_mae,
        ck.best_iteration,
        out.display()
    ))
}

pub fn log_jsonl(log: &[TrainLogRecord]) -> Result<String> {
    let mut s = String::new();
    for rec in log {
        s.push_str(&serde_json::to_string(rec)?);
        s.push('\n');
    }
    Ok(s)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn train_curve_csv(log: &[TrainLogRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "iteration",
        "loss",
        "lbar",
        "scale",
        "selected_fraction",
        "val_mae",
        "radius",
    ])?;
    for r in log {
        w.write_record([
            r.iteration.to_string(),
            fmt_f64(r.loss),
            opt(r.lbar),
            opt(r.scale),
            opt(r.selected_fraction),
            opt(r.val_mae),
            opt(r.radius),
        ])?;
    }
    csv_string(w)
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

// ---------------------------------------------------------------- evaluate

/// Everything computed while evaluating a checkpoint on one split.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// MAE of always predicting the mean training label (raw units).
    pub mean_predictor_mae: f64,
    pub train_embeddings: Matrix,
    pub eval_embeddings: Matrix,
    /// Evaluated labels in normalized units, as used for residual variance.
    pub eval_labels: Matrix,
    /// Predictions in raw label units.
    pub predictions: Matrix,
    pub extrapolated: Vec<bool>,
}

/// Embeds the training split and `split`, predicts `split` (radius-based
/// nearest neighbours for the metric loss, the linear head otherwise) and
/// computes every metric. MAE, R² and D5 are in raw label units; residual
/// variance uses normalized labels.
pub fn evaluate(
    ck: &Checkpoint,
    ds: &Dataset,
    split: Split,
    k_candidates: &[usize],
) -> Result<Evaluation> {
    if ds.d_x() != ck.input_dim() {
        return Err(Error::InvalidInput(format!(
            "checkpoint expects d_x={}, dataset has {}",
            ck.input_dim(),
            ds.d_x()
        )));
    }
    if ds.d_y() != ck.d_y {
        return Err(Error::InvalidInput(format!(
            "checkpoint expects d_y={}, dataset has {}",
            ck.d_y,
            ds.d_y()
        )));
    }
    let enc = ck.encoder()?;
    let train_idx = ds.indices(Split::Train);
    let eval_idx = ds.indices(split);
    if train_idx.len() < 5 || eval_idx.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "evaluation needs >= 5 training and >= 3 {} rows",
            split.as_str()
        )));
    }
    let train_raw = ds.y_raw.select_rows(&train_idx);
    let eval_raw = ds.y_raw.select_rows(&eval_idx);
    let train_y = ck.norm_params.apply(&train_raw);
    let eval_y = ck.norm_params.apply(&eval_raw);
    let train_f = enc.embed(&ds.x.select_rows(&train_idx))?;
    let eval_f = enc.embed(&ds.x.select_rows(&eval_idx))?;

    let (pred_norm, extrapolated) = match (ck.mode, ck.radius) {
        (Mode::Rm, Some(r)) => {
            EmbeddingIndex::new(train_f.clone(), train_y, r)?.predict_batch(&eval_f)?
        }
        _ => {
            let p = ck
                .head_predict(&eval_f)?
                .ok_or_else(|| Error::InvalidState("baseline checkpoint without a head".into()))?;
            (p, vec![false; eval_idx.len()])
        }
    };
    let pred = ck.norm_params.inverse(&pred_norm);
    let rv = metrics::residual_variance(&eval_f, &eval_y, k_candidates)?;

    let means = train_raw.column_means();
    let mut mean_pred = Matrix::zeros(eval_raw.rows(), eval_raw.cols());
    for r in 0..mean_pred.rows() {
        mean_pred.row_mut(r).copy_from_slice(&means);
    }

    let report = MetricsReport {
        mae: metrics::mae(&pred, &eval_raw)?,
        r2: metrics::r2(&pred, &eval_raw)?,
        d5: metrics::d5(&eval_f, &eval_raw, &train_f, &train_raw)?,
        rv: rv.rv,
        rv_best_k: rv.best_k,
        rv_excluded_fraction: rv.excluded_fraction,
        n_test: eval_idx.len(),
        extrapolated_fraction: extrapolated.iter().filter(|e| **e).count() as f64
            / eval_idx.len() as f64,
    };
    Ok(Evaluation {
        report,
        mean_predictor_mae: metrics::mae(&mean_pred, &eval_raw)?,
        train_embeddings: train_f,
        eval_embeddings: eval_f,
        eval_labels: eval_y,
        predictions: pred,
        extrapolated,
    })
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub mode: Mode,
    pub split: Split,
    pub metrics: MetricsReport,
    pub mean_predictor_mae: f64,
    pub radius: Option<f64>,
    pub scale: f64,
    pub best_iteration: usize,
    /// Resolved config of the evaluation (dataset and metrics).
    pub config: ExperimentConfig,
    /// Config stored in the checkpoint.
    pub checkpoint_config: serde_json::Value,
}

/// Where `evaluate` gets its data and metric settings.
#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub checkpoint: PathBuf,
    pub config: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub split: Split,
    pub seed: Option<u64>,
}

/// The experiment config used for evaluation: `--config` if given, else the
/// one stored in the checkpoint; `--dataset` replaces its data source.
pub fn evaluation_config(ck: &Checkpoint, opts: &EvaluateOptions) -> Result<ExperimentConfig> {
    let mut cfg = match &opts.config {
        Some(p) => ExperimentConfig::load(p, opts.seed)?,
        None => {
            let mut c: ExperimentConfig = serde_json::from_value(ck.config.clone())
                .map_err(|e| Error::Config(format!("checkpoint config: {e}")))?;
            c.resolve(opts.seed)?;
            c
        }
    };
    if let Some(p) = &opts.dataset {
        cfg.dataset = DatasetSpec {
            generate: None,
            path: Some(p.clone()),
            train_fraction: 1.0,
        };
        cfg.validate()?;
    }
    Ok(cfg)
}

pub fn run_evaluate(opts: &EvaluateOptions) -> Result<(EvaluationReport, Artifacts)> {
    let ck = Checkpoint::load(&opts.checkpoint)?;
    let cfg = evaluation_config(&ck, opts)?;
    let ds = cfg.dataset()?;
    let ev = evaluate(&ck, &ds, opts.split, &cfg.metrics.k_candidates)?;
    let report = EvaluationReport {
        format_version: REPORT_FORMAT_VERSION,
        mode: ck.mode,
        split: opts.split,
        metrics: ev.report.clone(),
        mean_predictor_mae: ev.mean_predictor_mae,
        radius: ck.radius,
        scale: ck.loss_state.scale(),
        best_iteration: ck.best_iteration,
        config: cfg,
        checkpoint_config: ck.config.clone(),
    };
    let mut art = Artifacts::default();
    art.add("report.json", json(&report)?);
    art.add("embeddings.csv", embeddings_csv(&ds, &ck, opts.split, &ev)?);
    art.add("pca3.csv", pca_csv(&ev)?);
    Ok((report, art))
}

pub fn cmd_evaluate(opts: &EvaluateOptions, out: &Path) -> Result<String> {
    let (report, art) = run_evaluate(opts)?;
    art.write(out)?;
    let m = &report.metrics;
    Ok(format!(
        "{} on {} ({} rows): MAE {:.6}  R2 {:.6}  D5 {:.6}  RV {:.6} (k={})  mean-predictor MAE {:.6}",
        report.mode.as_str(),
        report.split.as_str(),
        m.n_test,
        m.mae,
        m.r2,
        m.d5,
        m.rv,
        m.rv_best_k,
        report.mean_predictor_mae
    ))
}

/// Train and evaluated-split embeddings with raw labels:
/// `split,f0..,y0..,pred0..` (`pred` empty for training rows).
fn embeddings_csv(ds: &Dataset, ck: &Checkpoint, split: Split, ev: &Evaluation) -> Result<String> {
    let d_f = ev.train_embeddings.cols();
    let d_y = ds.d_y();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["split".to_string()];
    header.extend((0..d_f).map(|i| format!("f{i}")));
    header.extend((0..d_y).map(|i| format!("y{i}")));
    header.extend((0..d_y).map(|i| format!("pred{i}")));
    w.write_record(&header)?;
    let train_raw = ds.raw_labels(Split::Train);
    for r in 0..ev.train_embeddings.rows() {
        let mut rec = vec!["train".to_string()];
        rec.extend(ev.train_embeddings.row(r).iter().map(|v| fmt_f64(*v)));
        rec.extend(train_raw.row(r).iter().map(|v| fmt_f64(*v)));
        rec.extend((0..d_y).map(|_| String::new()));
        w.write_record(&rec)?;
    }
    if split != Split::Train {
        let eval_raw = ck.norm_params.inverse(&ev.eval_labels);
        for r in 0..ev.eval_embeddings.rows() {
            let mut rec = vec![split.as_str().to_string()];
            rec.extend(ev.eval_embeddings.row(r).iter().map(|v| fmt_f64(*v)));
            rec.extend(eval_raw.row(r).iter().map(|v| fmt_f64(*v)));
            rec.extend(ev.predictions.row(r).iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
        }
    }
    csv_string(w)
}

/// Three principal components of the evaluated-split embeddings.
fn pca_csv(ev: &Evaluation) -> Result<String> {
    let proj = pca_project(&ev.eval_embeddings, 3)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["pc0".into(), "pc1".into(), "pc2".into()];
    header.extend((0..ev.eval_labels.cols()).map(|i| format!("y{i}")));
    w.write_record(&header)?;
    for r in 0..proj.scores.rows() {
        let mut rec: Vec<String> = proj.scores.row(r).iter().map(|v| fmt_f64(*v)).collect();
        rec.extend(ev.eval_labels.row(r).iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    csv_string(w)
}

// ------------------------------------------------------------------ ablate

/// One ablation setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    #[serde(with = "sigma_serde")]
    pub sigma: f64,
    pub alpha: f64,
    pub mining: bool,
}

impl AblationCell {
    pub fn name(&self) -> String {
        let sigma = if self.sigma.is_infinite() {
            "inf".to_string()
        } else {
            self.sigma.to_string()
        };
        format!(
            "sigma={sigma} alpha={} mining={}",
            self.alpha,
            if self.mining { "on" } else { "off" }
        )
    }
}

/// Varies one factor at a time around `base`, dropping duplicates.
pub fn ablation_cells(base: AblationCell, spec: &AblationSpec) -> Vec<AblationCell> {
    let mut cells = vec![base];
    cells.extend(
        spec.sigmas
            .iter()
            .map(|s| AblationCell { sigma: s.0, ..base }),
    );
    cells.extend(
        spec.alphas
            .iter()
            .map(|&alpha| AblationCell { alpha, ..base }),
    );
    cells.extend(
        spec.mining
            .iter()
            .map(|&mining| AblationCell { mining, ..base }),
    );
    let mut unique: Vec<AblationCell> = Vec::new();
    for c in cells {
        let key = |x: &AblationCell| (x.sigma.to_bits(), x.alpha.to_bits(), x.mining);
        if !unique.iter().any(|u| key(u) == key(&c)) {
            unique.push(c);
        }
    }
    unique
}

/// One row of the ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub cell: AblationCell,
    pub metrics: MetricsReport,
    pub best_iteration: usize,
    pub radius: f64,
}

pub fn run_ablate(cfg: &ExperimentConfig) -> Result<(Vec<AblationRow>, Artifacts)> {
    let tcfg = cfg.train_config()?;
    if tcfg.mode != Mode::Rm {
        return Err(Error::Config(
            "ablation sweeps the metric loss; set train.mode to \"rm\"".into(),
        ));
    }
    let spec = cfg.ablation.clone().unwrap_or_default();
    let base = AblationCell {
        sigma: tcfg.loss.sigma,
        alpha: tcfg.loss.alpha,
        mining: tcfg.loss.mining_enabled,
    };
    let ds = cfg.dataset()?;
    let mut rows = Vec::new();
    let mut art = Artifacts::default();
    for (i, cell) in ablation_cells(base, &spec).into_iter().enumerate() {
        let mut t = tcfg.clone();
        t.loss.sigma = cell.sigma;
        t.loss.alpha = cell.alpha;
        t.loss.mining_enabled = cell.mining;
        let outcome = train(&ds, &t)?;
        let mut cell_cfg = cfg.clone();
        cell_cfg.train = Some(t.clone());
        cell_cfg.ablation = None;
        let ck = Checkpoint::from_outcome(
            &outcome,
            Mode::Rm,
            &ds.norm_params,
            serde_json::to_value(&cell_cfg)?,
        );
        let ev = evaluate(&ck, &ds, Split::Test, &cfg.metrics.k_candidates)?;
        art.add(
            format!("cells/{i:02}/train_log.jsonl"),
            log_jsonl(&outcome.log)?,
        );
        art.add(format!("cells/{i:02}/config.json"), json(&cell_cfg)?);
        rows.push(AblationRow {
            cell,
            metrics: ev.report,
            best_iteration: ck.best_iteration,
            radius: ck.radius.unwrap_or(f64::NAN),
        });
    }
    art.add("ablation.csv", ablation_csv(&rows)?);
    art.add(
        "ablation.json",
        json(&serde_json::json!({ "config": cfg, "rows": rows }))?,
    );
    Ok((rows, art))
}

pub fn ablation_csv(rows: &[AblationRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "cell",
        "sigma",
        "alpha",
        "mining",
        "mae",
        "r2",
        "d5",
        "rv",
        "rv_best_k",
        "radius",
        "best_iteration",
    ])?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.cell.name(),
            if r.cell.sigma.is_infinite() {
                "inf".into()
            } else {
                r.cell.sigma.to_string()
            },
            r.cell.alpha.to_string(),
            if r.cell.mining {
                "on".into()
            } else {
                "off".into()
            },
            fmt_f64(m.mae),
            fmt_f64(m.r2),
            fmt_f64(m.d5),
            fmt_f64(m.rv),
            m.rv_best_k.to_string(),
            fmt_f64(r.radius),
            r.best_iteration.to_string(),
        ])?;
    }
    csv_string(w)
}

pub fn cmd_ablate(cfg: &ExperimentConfig, out: &Path) -> Result<String> {
    let (rows, art) = run_ablate(cfg)?;
    art.write(out)?;
    let mut s = format!(
        "{} ablation cells written to {}\n",
        rows.len(),
        out.join("ablation.csv").display()
    );
    for r in &rows {
        s.push_str(&format!(
            "  {:<32} MAE {:.6}  R2 {:.4}  D5 {:.6}  RV {:.6}\n",
            r.cell.name(),
            r.metrics.mae,
            r.metrics.r2,
            r.metrics.d5,
            r.metrics.rv
        ));
    }
    Ok(s.trim_end().to_string())
}

// ---------------------------------------------------------------- argument parsing

#[derive(Debug, Parser)]
#[command(
    name = "rmetric",
    version,
    about = "Regression metric learning experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (CSV plus metadata sidecar).
    Generate(CommonArgs),
    /// Train a model and write checkpoint, log and tuned radius.
    Train(CommonArgs),
    /// Evaluate a checkpoint and write a JSON report plus CSV exports.
    Evaluate(EvaluateArgs),
    /// Sweep sigma, alpha and mining one factor at a time.
    Ablate(CommonArgs),
}

#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, clap::Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Experiment config; defaults to the one stored in the checkpoint.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset CSV replacing the config's data source.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Split to evaluate.
    #[arg(long, default_value = "test")]
    pub split: Split,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Cli {
    pub fn run(&self) -> Result<String> {
        match &self.command {
            Command::Generate(a) => {
                cmd_generate(&ExperimentConfig::load(&a.config, a.seed)?, &a.out)
            }
            Command::Train(a) => cmd_train(&ExperimentConfig::load(&a.config, a.seed)?, &a.out),
            Command::Ablate(a) => cmd_ablate(&ExperimentConfig::load(&a.config, a.seed)?, &a.out),
            Command::Evaluate(a) => cmd_evaluate(
                &EvaluateOptions {
                    checkpoint: a.checkpoint.clone(),
                    config: a.config.clone(),
                    dataset: a.dataset.clone(),
                    split: a.split,
                    seed: a.seed,
                },
                &a.out,
            ),
        }
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match cli.run() {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
