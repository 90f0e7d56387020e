//! Synthetic manifold-regression datasets, label normalization, splits,
//! batch sampling and the CSV + JSON sidecar file format.
//!
//! # Curves (`curves-v1`)
//!
//! `curve1d` draws a scalar label `t ~ U[0, 1]` and maps it into `d_x`
//! dimensions with
//!
//! ```text
//! γ_k(t) = cos(π·ω_k·t + k),   ω_0 = 1,   ω_k = 1 + 2·frac(k·√2)  (k ≥ 1)
//! ```
//!
//! The `k = 0` coordinate is `cos(πt)`, strictly monotone on [0, 1], so the
//! curve is injective.
//!
//! `surface2d` draws `u ~ U[0, 1]²` and uses (`d_x ≥ 2`)
//!
//! ```text
//! γ_0(u) = cos(π·u_0),   γ_1(u) = cos(π·u_1)
//! γ_k(u) = cos(π·(a_k·u_0 + b_k·u_1) + k),  a_k = 1 + frac(k·√2),  b_k = 1 + frac(k·√3)
//! ```
//!
//! Inputs receive i.i.d. `N(0, noise_sd²)` noise. Labels, noise and split
//! each come from their own ChaCha8 stream of the dataset seed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

pub const CURVES_VERSION: &str = "curves-v1";
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Curve1d,
    Surface2d,
}

impl DatasetKind {
    pub fn label_dim(self) -> usize {
        match self {
            DatasetKind::Curve1d => 1,
            DatasetKind::Surface2d => 2,
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "curve1d" => Ok(DatasetKind::Curve1d),
            "surface2d" => Ok(DatasetKind::Surface2d),
            other => Err(Error::InvalidInput(format!(
                "unknown dataset kind {other:?}"
            ))),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Curve1d => "curve1d",
            DatasetKind::Surface2d => "surface2d",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidInput(format!("unknown split tag {other:?}"))),
        }
    }
}

/// How raw labels are mapped to training units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum Normalization {
    /// `(y − mean) / sd` per dimension.
    Zscore,
    /// `(y − center) / half_range` for every dimension.
    Affine { center: f64, half_range: f64 },
}

/// Per-dimension offset and scale; `normalized = (raw − mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl NormParams {
    pub fn apply(&self, raw: &Matrix) -> Matrix {
        let mut out = raw.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.scale[c];
            }
        }
        out
    }

    pub fn inverse(&self, normalized: &Matrix) -> Matrix {
        let mut out = normalized.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = *v * self.scale[c] + self.mean[c];
            }
        }
        out
    }
}

/// Fits the normalization on `raw` and applies it.
pub fn normalize_labels(raw: &Matrix, mode: Normalization) -> Result<(Matrix, NormParams)> {
    let params = fit_normalization(raw, mode)?;
    Ok((params.apply(raw), params))
}

/// Parameters of `mode` fitted to `raw` (population standard deviation for z-scores).
pub fn fit_normalization(raw: &Matrix, mode: Normalization) -> Result<NormParams> {
    let d = raw.cols();
    match mode {
        Normalization::Affine { center, half_range } => {
            if !(half_range > 0.0) || !half_range.is_finite() || !center.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "affine normalization needs a finite center and half_range > 0, got ({center}, {half_range})"
                )));
            }
            Ok(NormParams {
                mean: vec![center; d],
                scale: vec![half_range; d],
            })
        }
        Normalization::Zscore => {
            if raw.rows() == 0 {
                return Err(Error::DegenerateInput("no labels to normalize".into()));
            }
            let mean = raw.column_means();
            let n = raw.rows() as f64;
            let mut scale = vec![0.0; d];
            for row in raw.row_iter() {
                for (c, v) in row.iter().enumerate() {
                    scale[c] += (v - mean[c]).powi(2);
                }
            }
            for (c, s) in scale.iter_mut().enumerate() {
                *s = (*s / n).sqrt();
                if !(*s > 0.0) {
                    return Err(Error::DegenerateInput(format!(
                        "label dimension {c} has zero variance"
                    )));
                }
            }
            Ok(NormParams { mean, scale })
        }
    }
}

/// Point on the `curve1d` manifold for label `t`.
pub fn curve_point(t: f64, d_x: usize) -> Vec<f64> {
    (0..d_x)
        .map(|k| {
            let omega = if k == 0 {
                1.0
            } else {
                1.0 + 2.0 * (k as f64 * std::f64::consts::SQRT_2).fract()
            };
            (std::f64::consts::PI * omega * t + k as f64).cos()
        })
        .collect()
}

/// Point on the `surface2d` manifold for label `(u0, u1)`.
pub fn surface_point(u0: f64, u1: f64, d_x: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    (0..d_x)
        .map(|k| match k {
            0 => (PI * u0).cos(),
            1 => (PI * u1).cos(),
            _ => {
                let kf = k as f64;
                let a = 1.0 + (kf * std::f64::consts::SQRT_2).fract();
                let b = 1.0 + (kf * 3f64.sqrt()).fract();
                (PI * (a * u0 + b * u1) + kf).cos()
            }
        })
        .collect()
}

/// Provenance written next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub curves: String,
    pub kind: Option<DatasetKind>,
    pub n: usize,
    pub d_x: usize,
    pub d_y: usize,
    pub seed: u64,
    pub noise_sd: f64,
    pub normalization: Normalization,
    pub norm_params: NormParams,
}

/// Inputs, raw and normalized labels, and split tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y_raw: Matrix,
    pub y: Matrix,
    pub split: Vec<Split>,
    pub normalization: Normalization,
    pub norm_params: NormParams,
    pub kind: Option<DatasetKind>,
    pub seed: u64,
    pub noise_sd: f64,
}

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.7, 0.1, 0.2];

/// Draws a synthetic dataset, splits it 7:1:2 and z-scores the labels using
/// the training rows.
pub fn generate(
    kind: DatasetKind,
    n: usize,
    d_x: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    if n < 10 {
        return Err(Error::InvalidInput(format!("need n >= 10, got {n}")));
    }
    if d_x < kind.label_dim() {
        return Err(Error::InvalidInput(format!(
            "{kind} needs d_x >= {}, got {d_x}",
            kind.label_dim()
        )));
    }
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(Error::InvalidInput(format!(
            "noise_sd must be >= 0, got {noise_sd}"
        )));
    }
    let d_y = kind.label_dim();
    let mut label_rng = rng::stream(seed, rng::Stream::Labels);
    let y_data: Vec<f64> = (0..n * d_y).map(|_| label_rng.random::<f64>()).collect();
    let y_raw = Matrix::new(n, d_y, y_data)?;

    let mut noise_rng = rng::stream(seed, rng::Stream::Noise);
    let normal = Normal::new(0.0, noise_sd.max(0.0))
        .map_err(|e| Error::InvalidInput(format!("noise distribution: {e}")))?;
    let mut x = Matrix::zeros(n, d_x);
    for r in 0..n {
        let clean = match kind {
            DatasetKind::Curve1d => curve_point(y_raw.get(r, 0), d_x),
            DatasetKind::Surface2d => surface_point(y_raw.get(r, 0), y_raw.get(r, 1), d_x),
        };
        for (dst, c) in x.row_mut(r).iter_mut().zip(clean) {
            *dst = if noise_sd > 0.0 {
                c + normal.sample(&mut noise_rng)
            } else {
                c
            };
        }
    }
    let split = split_assignment(n, &DEFAULT_FRACTIONS, seed)?;
    Dataset::assemble(
        x,
        y_raw,
        split,
        Normalization::Zscore,
        Some(kind),
        seed,
        noise_sd,
    )
}

/// Shuffled split tags with sizes `round(n·f_train)`, `round(n·f_val)` and
/// the remainder for test.
pub fn split_assignment(n: usize, fractions: &[f64; 3], seed: u64) -> Result<Vec<Split>> {
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || fractions.iter().any(|f| *f < 0.0) {
        return Err(Error::InvalidInput(format!(
            "split fractions must be non-negative and sum to 1, got {fractions:?}"
        )));
    }
    let n_train = (n as f64 * fractions[0]).round() as usize;
    let n_val = (n as f64 * fractions[1]).round() as usize;
    if n_train + n_val > n {
        return Err(Error::InvalidInput("split sizes exceed n".into()));
    }
    let n_test = n - n_train - n_val;
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::InvalidInput(format!(
            "split {fractions:?} of n={n} leaves an empty part ({n_train}/{n_val}/{n_test})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::Stream::Split));
    let mut tags = vec![Split::Test; n];
    for (pos, &i) in order.iter().enumerate() {
        tags[i] = if pos < n_train {
            Split::Train
        } else if pos < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(tags)
}

impl Dataset {
    /// Builds a dataset, fitting `normalization` on the training rows.
    pub fn assemble(
        x: Matrix,
        y_raw: Matrix,
        split: Vec<Split>,
        normalization: Normalization,
        kind: Option<DatasetKind>,
        seed: u64,
        noise_sd: f64,
    ) -> Result<Self> {
        if x.rows() != y_raw.rows() || split.len() != x.rows() {
            return Err(Error::InvalidInput(format!(
                "row mismatch: x {}, y {}, split {}",
                x.rows(),
                y_raw.rows(),
                split.len()
            )));
        }
        let train_idx: Vec<usize> = (0..split.len())
            .filter(|&i| split[i] == Split::Train)
            .collect();
        let norm_params = fit_normalization(&y_raw.select_rows(&train_idx), normalization)?;
        Self::with_params(
            x,
            y_raw,
            split,
            normalization,
            norm_params,
            kind,
            seed,
            noise_sd,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn with_params(
        x: Matrix,
        y_raw: Matrix,
        split: Vec<Split>,
        normalization: Normalization,
        norm_params: NormParams,
        kind: Option<DatasetKind>,
        seed: u64,
        noise_sd: f64,
    ) -> Result<Self> {
        if norm_params.mean.len() != y_raw.cols()
            || norm_params.scale.len() != y_raw.cols()
            || norm_params.scale.iter().any(|s| !(*s > 0.0))
        {
            return Err(Error::InvalidInput(
                "normalization parameters do not fit labels".into(),
            ));
        }
        let y = norm_params.apply(&y_raw);
        Ok(Self {
            x,
            y_raw,
            y,
            split,
            normalization,
            norm_params,
            kind,
            seed,
            noise_sd,
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn d_x(&self) -> usize {
        self.x.cols()
    }

    pub fn d_y(&self) -> usize {
        self.y_raw.cols()
    }

    pub fn indices(&self, part: Split) -> Vec<usize> {
        (0..self.split.len())
            .filter(|&i| self.split[i] == part)
            .collect()
    }

    /// Inputs and normalized labels of one split.
    pub fn part(&self, part: Split) -> (Matrix, Matrix) {
        let idx = self.indices(part);
        (self.x.select_rows(&idx), self.y.select_rows(&idx))
    }

    pub fn raw_labels(&self, part: Split) -> Matrix {
        self.y_raw.select_rows(&self.indices(part))
    }

    /// Reassigns split tags and refits the normalization.
    pub fn resplit(&self, fractions: &[f64; 3], seed: u64) -> Result<Dataset> {
        let split = split_assignment(self.len(), fractions, seed)?;
        Dataset::assemble(
            self.x.clone(),
            self.y_raw.clone(),
            split,
            self.normalization,
            self.kind,
            self.seed,
            self.noise_sd,
        )
    }

    /// Re-normalizes labels with a different mode, fitted on training rows.
    pub fn renormalized(&self, mode: Normalization) -> Result<Dataset> {
        Dataset::assemble(
            self.x.clone(),
            self.y_raw.clone(),
            self.split.clone(),
            mode,
            self.kind,
            self.seed,
            self.noise_sd,
        )
    }

    /// Keeps `ceil(fraction · count)` of the training rows (at least two)
    /// and every validation and test row. Normalization is left untouched so
    /// results stay comparable with the full dataset.
    pub fn subsample_train(&self, fraction: f64, seed: u64) -> Result<Dataset> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "subsample fraction must be in (0, 1], got {fraction}"
            )));
        }
        let mut rng = rng::stream(seed, rng::Stream::Subsample);
        let mut keep = self.indices(Split::Test);
        keep.extend(self.indices(Split::Val));
        let mut idx = self.indices(Split::Train);
        let want = ((idx.len() as f64 * fraction).ceil() as usize)
            .max(2)
            .min(idx.len());
        idx.shuffle(&mut rng);
        keep.extend_from_slice(&idx[..want]);
        keep.sort_unstable();
        Self::with_params(
            self.x.select_rows(&keep),
            self.y_raw.select_rows(&keep),
            keep.iter().map(|&i| self.split[i]).collect(),
            self.normalization,
            self.norm_params.clone(),
            self.kind,
            self.seed,
            self.noise_sd,
        )
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            format_version: DATASET_FORMAT_VERSION,
            curves: CURVES_VERSION.to_string(),
            kind: self.kind,
            n: self.len(),
            d_x: self.d_x(),
            d_y: self.d_y(),
            seed: self.seed,
            noise_sd: self.noise_sd,
            normalization: self.normalization,
            norm_params: self.norm_params.clone(),
        }
    }

    /// Writes `path` (CSV) and its sidecar [`meta_path`].
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        std::fs::write(
            meta_path(path),
            serde_json::to_string_pretty(&self.meta())? + "\n",
        )?;
        Ok(())
    }

    /// CSV with header `x0..x{d_x-1},y0..y{d_y-1},split`; labels are raw and
    /// every float carries 17 significant digits.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = (0..self.d_x()).map(|i| format!("x{i}")).collect();
        header.extend((0..self.d_y()).map(|i| format!("y{i}")));
        header.push("split".into());
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut rec: Vec<String> = self.x.row(r).iter().map(|v| fmt_f64(*v)).collect();
            rec.extend(self.y_raw.row(r).iter().map(|v| fmt_f64(*v)));
            rec.push(self.split[r].as_str().into());
            w.write_record(&rec)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// Reads a CSV written by [`Dataset::save`]. With a sidecar the stored
    /// normalization parameters are reused; without one, labels are z-scored
    /// on the training rows.
    pub fn load(path: &Path) -> Result<Dataset> {
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        let mut rdr = csv::Reader::from_path(path)?;
        let header = rdr.headers()?.clone();
        let d_x = header.iter().filter(|h| h.starts_with('x')).count();
        let d_y = header.iter().filter(|h| h.starts_with('y')).count();
        let expected: Vec<String> = (0..d_x)
            .map(|i| format!("x{i}"))
            .chain((0..d_y).map(|i| format!("y{i}")))
            .chain(std::iter::once("split".to_string()))
            .collect();
        if header.iter().ne(expected.iter().map(String::as_str)) || d_x == 0 || d_y == 0 {
            return Err(Error::InvalidInput(format!(
                "unexpected dataset header {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let (mut xs, mut ys, mut tags) = (Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (c, field) in rec.iter().enumerate() {
                if c < d_x + d_y {
                    let v: f64 = field.trim().parse().map_err(|_| {
                        Error::InvalidInput(format!("row {line}, column {c}: bad number {field:?}"))
                    })?;
                    if c < d_x {
                        xs.push(v);
                    } else {
                        ys.push(v);
                    }
                } else {
                    tags.push(field.trim().parse::<Split>()?);
                }
            }
        }
        let n = tags.len();
        let x = Matrix::new(n, d_x, xs)?;
        let y_raw = Matrix::new(n, d_y, ys)?;
        let mp = meta_path(path);
        if mp.exists() {
            let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(&mp)?)?;
            if meta.format_version != DATASET_FORMAT_VERSION {
                return Err(Error::InvalidInput(format!(
                    "unsupported dataset format version {}",
                    meta.format_version
                )));
            }
            if meta.n != n || meta.d_x != d_x || meta.d_y != d_y {
                return Err(Error::InvalidInput(
                    "dataset metadata does not match CSV".into(),
                ));
            }
            Self::with_params(
                x,
                y_raw,
                tags,
                meta.normalization,
                meta.norm_params,
                meta.kind,
                meta.seed,
                meta.noise_sd,
            )
        } else {
            Dataset::assemble(x, y_raw, tags, Normalization::Zscore, None, 0, 0.0)
        }
    }
}

/// Sidecar path: `data.csv` → `data.meta.json`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Endless epoch-wise shuffled batches over a fixed index pool.
///
/// Each epoch is a fresh permutation; a trailing batch shorter than two is
/// dropped because the pair loss needs at least one pair.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    pool: Vec<usize>,
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
    epoch: usize,
    rng: rand_chacha::ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(pool: Vec<usize>, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size < 2 {
            return Err(Error::InvalidInput(format!(
                "batch size must be >= 2, got {batch_size}"
            )));
        }
        if pool.len() < 2 {
            return Err(Error::InvalidInput(
                "batch sampling needs at least two rows".into(),
            ));
        }
        Ok(Self {
            pool,
            batch_size,
            order: Vec::new(),
            cursor: 0,
            epoch: 0,
            rng: rng::stream(seed, rng::Stream::Batches),
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    fn reshuffle(&mut self) {
        self.order = self.pool.clone();
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
        self.epoch += 1;
    }
}

impl Iterator for BatchSampler {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.cursor >= self.order.len() || self.order.len() - self.cursor < 2 {
            self.reshuffle();
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        Some(batch)
    }
}
