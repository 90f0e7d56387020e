//! Distance-weighted nearest-neighbour prediction in the learned space.
//!
//! A query `f_t` is labelled with the Gaussian-weighted mean of the training
//! labels whose embeddings lie within radius `r`, using bandwidth `r/3`:
//! `a_i = exp(−‖f_i − f_t‖² / (2 (r/3)²))`. An empty neighbourhood falls back
//! to the nearest training label and is flagged as extrapolated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{euclidean, Matrix};

/// Training embeddings, their labels and the prediction radius.
#[derive(Debug, Clone)]
pub struct EmbeddingIndex {
    features: Matrix,
    labels: Matrix,
    radius: f64,
}

/// One prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Vec<f64>,
    pub extrapolated: bool,
    pub neighbors: usize,
}

impl EmbeddingIndex {
    pub fn new(features: Matrix, labels: Matrix, radius: f64) -> Result<Self> {
        if features.rows() != labels.rows() {
            return Err(Error::InvalidInput(format!(
                "{} embeddings but {} labels",
                features.rows(),
                labels.rows()
            )));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!(
                "radius must be > 0, got {radius}"
            )));
        }
        Ok(Self {
            features,
            labels,
            radius,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &Matrix {
        &self.labels
    }

    pub fn predict(&self, query: &[f64]) -> Result<Prediction> {
        if self.is_empty() {
            return Err(Error::InvalidState("prediction from an empty index".into()));
        }
        if query.len() != self.features.cols() {
            return Err(Error::InvalidInput(format!(
                "query has {} dims, index has {}",
                query.len(),
                self.features.cols()
            )));
        }
        let dists: Vec<f64> = self
            .features
            .row_iter()
            .map(|row| euclidean(row, query))
            .collect();
        Ok(weighted_vote(&dists, &self.labels, self.radius))
    }

    /// Row-wise [`EmbeddingIndex::predict`].
    pub fn predict_batch(&self, queries: &Matrix) -> Result<(Matrix, Vec<bool>)> {
        let mut out = Matrix::zeros(queries.rows(), self.labels.cols());
        let mut flags = Vec::with_capacity(queries.rows());
        for t in 0..queries.rows() {
            let p = self.predict(queries.row(t))?;
            out.row_mut(t).copy_from_slice(&p.label);
            flags.push(p.extrapolated);
        }
        Ok((out, flags))
    }
}

/// Kernel weight of a neighbour at distance `d` for radius `r`.
#[inline]
pub fn kernel_weight(d: f64, r: f64) -> f64 {
    let bw = r / 3.0;
    (-(d * d) / (2.0 * bw * bw)).exp()
}

/// Prediction from precomputed distances to every training point.
fn weighted_vote(dists: &[f64], labels: &Matrix, r: f64) -> Prediction {
    let d_y = labels.cols();
    let mut acc = vec![0.0; d_y];
    let mut total = 0.0;
    let mut neighbors = 0;
    for (i, &d) in dists.iter().enumerate() {
        if d <= r {
            let a = kernel_weight(d, r);
            total += a;
            neighbors += 1;
            for (s, y) in acc.iter_mut().zip(labels.row(i)) {
                *s += a * y;
            }
        }
    }
    if neighbors > 0 && total > 0.0 {
        acc.iter_mut().for_each(|s| *s /= total);
        return Prediction {
            label: acc,
            extrapolated: false,
            neighbors,
        };
    }
    let mut best = 0;
    for (i, &d) in dists.iter().enumerate() {
        if d < dists[best] {
            best = i;
        }
    }
    Prediction {
        label: labels.row(best).to_vec(),
        extrapolated: neighbors == 0,
        neighbors,
    }
}

/// Candidate radii for [`tune_radius`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RadiusGrid {
    /// `points` radii spaced geometrically between two percentiles of all
    /// train–validation embedding distances.
    Auto {
        points: usize,
        lower_percentile: f64,
        upper_percentile: f64,
    },
    /// An explicit list.
    Values(Vec<f64>),
}

impl Default for RadiusGrid {
    fn default() -> Self {
        RadiusGrid::Auto {
            points: 32,
            lower_percentile: 1.0,
            upper_percentile: 50.0,
        }
    }
}

/// Linear-interpolation percentile (`p` in [0, 100]) of sorted data.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// `points` values from `lo` to `hi` with constant ratio.
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let ratio = (hi / lo).ln();
            (0..points)
                .map(|i| {
                    if i + 1 == points {
                        hi
                    } else {
                        lo * (ratio * i as f64 / (points - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Result of [`tune_radius`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusChoice {
    pub radius: f64,
    pub val_mae: f64,
    /// Set when every embedding coincided and no radius could be preferred.
    pub degenerate: bool,
    /// `(radius, validation MAE)` for every candidate, ascending radius.
    pub evaluated: Vec<(f64, f64)>,
}

/// Picks the radius with the smallest validation MAE (ties go to the
/// smaller radius).
pub fn tune_radius(
    train_f: &Matrix,
    train_y: &Matrix,
    val_f: &Matrix,
    val_y: &Matrix,
    grid: &RadiusGrid,
) -> Result<RadiusChoice> {
    if train_f.rows() == 0 || val_f.rows() == 0 {
        return Err(Error::InvalidInput(
            "radius tuning needs non-empty train and validation sets".into(),
        ));
    }
    if train_f.rows() != train_y.rows() || val_f.rows() != val_y.rows() {
        return Err(Error::InvalidInput("embedding/label row mismatch".into()));
    }
    if train_f.cols() != val_f.cols() || train_y.cols() != val_y.cols() {
        return Err(Error::InvalidInput(
            "train/validation dimension mismatch".into(),
        ));
    }
    let dists: Vec<Vec<f64>> = val_f
        .row_iter()
        .map(|q| train_f.row_iter().map(|t| euclidean(t, q)).collect())
        .collect();

    let mut candidates: Vec<f64> = match grid {
        RadiusGrid::Values(v) => v
            .iter()
            .copied()
            .filter(|r| *r > 0.0 && r.is_finite())
            .collect(),
        RadiusGrid::Auto {
            points,
            lower_percentile,
            upper_percentile,
        } => {
            let mut all: Vec<f64> = dists.iter().flatten().copied().collect();
            all.sort_by(f64::total_cmp);
            let mut lo = percentile_sorted(&all, *lower_percentile);
            let hi = percentile_sorted(&all, *upper_percentile);
            if hi <= 0.0 {
                Vec::new()
            } else {
                if lo <= 0.0 {
                    lo = all.iter().copied().find(|&d| d > 0.0).unwrap_or(hi).min(hi);
                }
                geometric_grid(lo, hi, (*points).max(1))
            }
        }
    };
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let all_coincide = dists.iter().flatten().all(|&d| d == 0.0);
    if candidates.is_empty() || all_coincide {
        let radius = candidates.first().copied().unwrap_or(f64::EPSILON);
        let mae = validation_mae(&dists, train_y, val_y, radius);
        return Ok(RadiusChoice {
            radius,
            val_mae: mae,
            degenerate: true,
            evaluated: vec![(radius, mae)],
        });
    }

    let mut evaluated = Vec::with_capacity(candidates.len());
    let mut best = (candidates[0], f64::INFINITY);
    for &r in &candidates {
        let mae = validation_mae(&dists, train_y, val_y, r);
        evaluated.push((r, mae));
        if mae < best.1 {
            best = (r, mae);
        }
    }
    Ok(RadiusChoice {
        radius: best.0,
        val_mae: best.1,
        degenerate: false,
        evaluated,
    })
}

fn validation_mae(dists: &[Vec<f64>], train_y: &Matrix, val_y: &Matrix, r: f64) -> f64 {
    let mut sum = 0.0;
    for (t, row) in dists.iter().enumerate() {
        let p = weighted_vote(row, train_y, r);
        sum += p
            .label
            .iter()
            .zip(val_y.row(t))
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    }
    sum / (val_y.rows() * val_y.cols()) as f64
}
