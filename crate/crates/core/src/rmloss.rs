//! Regression metric loss.
//!
//! For a batch of representations `f_i` with labels `y_i` and a learnable
//! scale `s = exp(log_s)`:
//!
//! ```text
//! D_ij = | s·‖f_i − f_j‖ − ‖y_i − y_j‖ |
//! W_ij = exp(−‖y_i − y_j‖² / 2σ²) + α
//! l̄_k  = 0.9·l̄_{k−1} + 0.1·mean_{i≠j}(W·D)        (l̄_1 = first batch mean)
//! M_ij = [W_ij·D_ij > l̄_k]
//! L    = Σ M·W·D / Σ M·W
//! ```
//!
//! Sums run over ordered pairs `i ≠ j`. When the mask selects nothing the
//! loss falls back to the unmasked weighted mean `Σ W·D / Σ W`. The mask and
//! `l̄` are treated as constants when differentiating.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{euclidean, Matrix};

/// Hyper-parameters of the loss. `sigma` may be `+∞`, in which case every
/// weight equals `1 + alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    #[serde(with = "sigma_serde")]
    pub sigma: f64,
    pub alpha: f64,
    #[serde(default = "default_ema_decay")]
    pub ema_decay: f64,
    #[serde(default = "default_true")]
    pub mining_enabled: bool,
}

fn default_ema_decay() -> f64 {
    0.9
}

fn default_true() -> bool {
    true
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            alpha: 0.1,
            ema_decay: 0.9,
            mining_enabled: true,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Config(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if !(0.0..1.0).contains(&self.ema_decay) {
            return Err(Error::Config(format!(
                "ema_decay must be in [0, 1), got {}",
                self.ema_decay
            )));
        }
        Ok(())
    }

    /// Pair weight for a label distance.
    #[inline]
    pub fn weight(&self, label_dist: f64) -> f64 {
        if self.sigma.is_infinite() {
            return 1.0 + self.alpha;
        }
        (-(label_dist * label_dist) / (2.0 * self.sigma * self.sigma)).exp() + self.alpha
    }
}

/// `sigma` as a JSON number, or the string `"inf"` for `+∞`.
pub mod sigma_serde {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "+inf" | "infinity") => Ok(f64::INFINITY),
            Raw::Text(t) => Err(de::Error::custom(format!("invalid sigma {t:?}"))),
        }
    }
}

/// Learnable scale and mining threshold carried across iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossState {
    pub log_s: f64,
    pub ema_lbar: Option<f64>,
    pub iteration: u64,
}

impl Default for LossState {
    fn default() -> Self {
        Self {
            log_s: 0.0,
            ema_lbar: None,
            iteration: 0,
        }
    }
}

impl LossState {
    pub fn scale(&self) -> f64 {
        self.log_s.exp()
    }
}

/// Per-batch pair matrices. Diagonal entries are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    /// `‖f_i − f_j‖`
    pub feature_dist: Matrix,
    /// `‖y_i − y_j‖`
    pub label_dist: Matrix,
    /// `D_ij`
    pub residual: Matrix,
    /// `W_ij`
    pub weight: Matrix,
    /// `M_ij` in {0, 1}; all ones off the diagonal until [`mine_mask`] runs.
    pub mask: Matrix,
    /// `s` at the time the batch was built.
    pub scale: f64,
    /// Number of ordered off-diagonal pairs with `M_ij = 1`.
    pub pair_count_selected: usize,
}

impl PairBatch {
    pub fn size(&self) -> usize {
        self.residual.rows()
    }

    /// Ordered off-diagonal pair count, `B(B−1)`.
    pub fn pair_count(&self) -> usize {
        let b = self.size();
        b * (b - 1)
    }

    pub fn selected_fraction(&self) -> f64 {
        self.pair_count_selected as f64 / self.pair_count() as f64
    }

    /// Mean of `W·D` over off-diagonal pairs.
    pub fn mean_weighted_residual(&self) -> f64 {
        let b = self.size();
        let mut sum = 0.0;
        for i in 0..b {
            for j in 0..b {
                if i != j {
                    sum += self.weight.get(i, j) * self.residual.get(i, j);
                }
            }
        }
        sum / self.pair_count() as f64
    }
}

/// Builds `D` and `W` for a batch.
pub fn pair_terms(
    f: &Matrix,
    y: &Matrix,
    state: &LossState,
    cfg: &LossConfig,
) -> Result<PairBatch> {
    let b = f.rows();
    if b < 2 {
        return Err(Error::InvalidBatch { rows: b });
    }
    if y.rows() != b {
        return Err(Error::InvalidInput(format!(
            "feature rows {b} != label rows {}",
            y.rows()
        )));
    }
    let s = state.scale();
    let mut fd = Matrix::zeros(b, b);
    let mut yd = Matrix::zeros(b, b);
    let mut res = Matrix::zeros(b, b);
    let mut w = Matrix::zeros(b, b);
    let mut mask = Matrix::filled(b, b, 1.0);
    for i in 0..b {
        mask.set(i, i, 0.0);
        w.set(i, i, cfg.weight(0.0));
        for j in (i + 1)..b {
            let df = euclidean(f.row(i), f.row(j));
            let dy = euclidean(y.row(i), y.row(j));
            let r = (s * df - dy).abs();
            let wt = cfg.weight(dy);
            for (a, c) in [(i, j), (j, i)] {
                fd.set(a, c, df);
                yd.set(a, c, dy);
                res.set(a, c, r);
                w.set(a, c, wt);
            }
        }
    }
    Ok(PairBatch {
        feature_dist: fd,
        label_dist: yd,
        residual: res,
        weight: w,
        mask,
        scale: s,
        pair_count_selected: b * (b - 1),
    })
}

/// Outcome of one mining step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiningStep {
    /// `mean_{i≠j}(W·D)` for this batch.
    pub batch_mean: f64,
    /// Threshold after the update.
    pub lbar: f64,
    /// Fraction of off-diagonal pairs kept.
    pub selected_fraction: f64,
}

/// Updates the moving-average threshold, then fills `batch.mask`.
///
/// The threshold is always updated; with mining disabled the mask stays all
/// ones off the diagonal.
pub fn mine_mask(batch: &mut PairBatch, state: &mut LossState, cfg: &LossConfig) -> MiningStep {
    let mean = batch.mean_weighted_residual();
    let lbar = match state.ema_lbar {
        None => mean,
        // decay·prev + (1 − decay)·mean, written so that mean == prev is an exact fixed point
        Some(prev) => prev + (1.0 - cfg.ema_decay) * (mean - prev),
    };
    state.ema_lbar = Some(lbar);
    state.iteration += 1;

    let b = batch.size();
    let mut selected = 0;
    for i in 0..b {
        for j in 0..b {
            let keep = i != j
                && (!cfg.mining_enabled
                    || batch.weight.get(i, j) * batch.residual.get(i, j) > lbar);
            batch.mask.set(i, j, if keep { 1.0 } else { 0.0 });
            selected += keep as usize;
        }
    }
    batch.pair_count_selected = selected;
    MiningStep {
        batch_mean: mean,
        lbar,
        selected_fraction: batch.selected_fraction(),
    }
}

/// Normalized per-pair coefficients `∂L/∂D_ij`, honouring the fallback.
fn pair_coefficients(batch: &PairBatch) -> (Matrix, bool) {
    let b = batch.size();
    let mut denom = 0.0;
    for i in 0..b {
        for j in 0..b {
            if i != j {
                denom += batch.mask.get(i, j) * batch.weight.get(i, j);
            }
        }
    }
    let fallback = denom <= 0.0;
    if fallback {
        denom = (0..b)
            .flat_map(|i| (0..b).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| batch.weight.get(i, j))
            .sum();
    }
    let mut coeff = Matrix::zeros(b, b);
    for i in 0..b {
        for j in 0..b {
            if i == j {
                continue;
            }
            let m = if fallback { 1.0 } else { batch.mask.get(i, j) };
            coeff.set(i, j, m * batch.weight.get(i, j) / denom);
        }
    }
    (coeff, fallback)
}

/// Unmasked weighted mean `Σ W·D / Σ W` over off-diagonal pairs.
pub fn unmasked_loss(batch: &PairBatch) -> f64 {
    let b = batch.size();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..b {
        for j in 0..b {
            if i != j {
                num += batch.weight.get(i, j) * batch.residual.get(i, j);
                den += batch.weight.get(i, j);
            }
        }
    }
    num / den
}

/// Whether [`rm_loss`] will use the unmasked fallback for this batch.
pub fn uses_fallback(batch: &PairBatch) -> bool {
    pair_coefficients(batch).1
}

/// Masked weighted objective.
pub fn rm_loss(batch: &PairBatch) -> f64 {
    let b = batch.size();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..b {
        for j in 0..b {
            if i != j {
                let mw = batch.mask.get(i, j) * batch.weight.get(i, j);
                num += mw * batch.residual.get(i, j);
                den += mw;
            }
        }
    }
    if den > 0.0 {
        num / den
    } else {
        unmasked_loss(batch)
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradient of [`rm_loss`] with respect to the representations and `log_s`.
pub fn rm_loss_backward(batch: &PairBatch, f: &Matrix) -> Result<(Matrix, f64)> {
    let b = batch.size();
    if f.rows() != b {
        return Err(Error::InvalidInput(format!(
            "batch has {b} rows, features have {}",
            f.rows()
        )));
    }
    let (coeff, _) = pair_coefficients(batch);
    let s = batch.scale;
    let d = f.cols();
    let mut grad = Matrix::zeros(b, d);
    let mut d_log_s = 0.0;
    for i in 0..b {
        for j in (i + 1)..b {
            // both orderings carry the same coefficient
            let c = coeff.get(i, j) + coeff.get(j, i);
            if c == 0.0 {
                continue;
            }
            let df = batch.feature_dist.get(i, j);
            let sg = sign(s * df - batch.label_dist.get(i, j));
            if sg == 0.0 {
                continue;
            }
            d_log_s += c * sg * s * df;
            if df == 0.0 {
                continue;
            }
            let k = c * sg * s / df;
            for col in 0..d {
                let g = k * (f.get(i, col) - f.get(j, col));
                grad.set(i, col, grad.get(i, col) + g);
                grad.set(j, col, grad.get(j, col) - g);
            }
        }
    }
    Ok((grad, d_log_s))
}

fn check_same_shape(pred: &Matrix, y: &Matrix) -> Result<()> {
    if pred.shape() != y.shape() || pred.is_empty() {
        return Err(Error::InvalidInput(format!(
            "prediction shape {:?} vs label shape {:?}",
            pred.shape(),
            y.shape()
        )));
    }
    Ok(())
}

/// Mean squared error over all entries and its gradient.
pub fn mse_loss(pred: &Matrix, y: &Matrix) -> Result<(f64, Matrix)> {
    check_same_shape(pred, y)?;
    let n = pred.data().len() as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut loss = 0.0;
    for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(y.data()) {
        let r = p - t;
        loss += r * r;
        *g = 2.0 * r / n;
    }
    Ok((loss / n, grad))
}

/// Mean absolute error over all entries and its (sub)gradient, `sign(0) = 0`.
pub fn l1_loss(pred: &Matrix, y: &Matrix) -> Result<(f64, Matrix)> {
    check_same_shape(pred, y)?;
    let n = pred.data().len() as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut loss = 0.0;
    for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(y.data()) {
        let r = p - t;
        loss += r.abs();
        *g = sign(r) / n;
    }
    Ok((loss / n, grad))
}
