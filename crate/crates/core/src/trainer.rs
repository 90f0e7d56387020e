//! Training loops for the metric loss and the MSE/L1 baselines, with
//! periodic validation and best-validation model selection.

use serde::{Deserialize, Serialize};

use crate::data::{BatchSampler, Dataset, Split};
use crate::encoder::{Activation, AdamState, EncoderParams, HeadParams, ParamGroup};
use crate::error::{Error, Result};
use crate::inference::{tune_radius, RadiusChoice, RadiusGrid};
use crate::linalg::Matrix;
use crate::metrics;
use crate::rmloss::{self, LossConfig, LossState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Metric loss on the representation, nearest-neighbour prediction.
    Rm,
    /// Linear head trained with mean squared error.
    Mse,
    /// Linear head trained with mean absolute error.
    L1,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Rm => "rm",
            Mode::Mse => "mse",
            Mode::L1 => "l1",
        }
    }
}

/// Encoder shape: `d_x → hidden… → d_f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_d_f")]
    pub d_f: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

fn default_d_f() -> usize {
    8
}

fn default_activation() -> Activation {
    Activation::Tanh
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
            d_f: default_d_f(),
            activation: default_activation(),
        }
    }
}

impl Architecture {
    pub fn layer_sizes(&self, d_x: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(d_x);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(self.d_f);
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: Mode,
    pub iterations: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub architecture: Architecture,
    #[serde(default)]
    pub radius_grid: RadiusGrid,
}

fn default_batch_size() -> usize {
    64
}

fn default_lr() -> f64 {
    1e-4
}

fn default_eval_every() -> usize {
    500
}

impl TrainConfig {
    pub fn new(mode: Mode, iterations: usize, seed: u64) -> Self {
        Self {
            mode,
            iterations,
            batch_size: default_batch_size(),
            lr: default_lr(),
            loss: LossConfig::default(),
            eval_every: default_eval_every(),
            seed,
            architecture: Architecture::default(),
            radius_grid: RadiusGrid::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be > 0".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be >= 2".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be >= 1".into()));
        }
        if self.architecture.d_f == 0 || self.architecture.hidden.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        self.loss.validate()
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub iteration: usize,
    pub loss: f64,
    /// Mean weighted residual of the batch (metric loss only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_mae: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub encoder: EncoderParams,
    pub head: Option<HeadParams>,
    pub loss_state: LossState,
    pub adam: AdamState,
    /// Radius re-tuned on the selected parameters (metric loss only).
    pub radius: Option<RadiusChoice>,
    pub best_iteration: usize,
    pub best_val_mae: f64,
    pub log: Vec<TrainLogRecord>,
}

/// Forward pass without a cache.
pub fn embed(params: &EncoderParams, x: &Matrix) -> Result<Matrix> {
    params.embed(x)
}

#[derive(Clone)]
struct Snapshot {
    encoder: EncoderParams,
    head: Option<HeadParams>,
    loss_state: LossState,
    adam: AdamState,
    iteration: usize,
    val_mae: f64,
}

struct Validation {
    mae: f64,
    radius: Option<RadiusChoice>,
}

fn validate_model(
    encoder: &EncoderParams,
    head: Option<&HeadParams>,
    train: &(Matrix, Matrix),
    val: &(Matrix, Matrix),
    grid: &RadiusGrid,
) -> Result<Validation> {
    let val_f = encoder.embed(&val.0)?;
    match head {
        Some(h) => Ok(Validation {
            mae: metrics::mae(&h.forward(&val_f)?, &val.1)?,
            radius: None,
        }),
        None => {
            let train_f = encoder.embed(&train.0)?;
            let choice = tune_radius(&train_f, &train.1, &val_f, &val.1, grid)?;
            Ok(Validation {
                mae: choice.val_mae,
                radius: Some(choice),
            })
        }
    }
}

/// Trains on the dataset's training split, validating every
/// `cfg.eval_every` iterations and at the last one. The returned
/// parameters are those with the lowest validation MAE (earliest on ties).
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train = dataset.part(Split::Train);
    let val = dataset.part(Split::Val);
    if train.0.rows() < 2 || val.0.rows() == 0 {
        return Err(Error::InvalidInput(format!(
            "training needs >= 2 train rows and >= 1 validation row, got {} and {}",
            train.0.rows(),
            val.0.rows()
        )));
    }

    let sizes = cfg.architecture.layer_sizes(dataset.d_x());
    let mut encoder = EncoderParams::init(&sizes, cfg.architecture.activation, cfg.seed)?;
    let mut head = match cfg.mode {
        Mode::Rm => None,
        Mode::Mse | Mode::L1 => Some(HeadParams::init(
            cfg.architecture.d_f,
            dataset.d_y(),
            cfg.seed,
        )?),
    };
    let mut loss_state = LossState::default();
    let mut group_sizes = encoder.group_sizes();
    match &head {
        Some(h) => group_sizes.extend(h.group_sizes()),
        None => group_sizes.push(1),
    }
    let mut adam = AdamState::new(cfg.lr, &group_sizes);

    let mut sampler = BatchSampler::new((0..train.0.rows()).collect(), cfg.batch_size, cfg.seed)?;
    let mut log = Vec::with_capacity(cfg.iterations);
    let mut best: Option<Snapshot> = None;

    for iteration in 1..=cfg.iterations {
        let batch = sampler.next().expect("sampler is endless");
        let xb = train.0.select_rows(&batch);
        let yb = train.1.select_rows(&batch);
        let (f, cache) = encoder.forward(&xb)?;

        let mut record = TrainLogRecord {
            iteration,
            loss: f64::NAN,
            batch_mean: None,
            lbar: None,
            scale: None,
            selected_fraction: None,
            val_mae: None,
            radius: None,
        };

        match head.as_mut() {
            None => {
                let mut pairs = rmloss::pair_terms(&f, &yb, &loss_state, &cfg.loss)?;
                let step = rmloss::mine_mask(&mut pairs, &mut loss_state, &cfg.loss);
                let loss = rmloss::rm_loss(&pairs);
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { iteration, batch });
                }
                let (d_f, d_log_s) = rmloss::rm_loss_backward(&pairs, &f)?;
                let grads = encoder.backward(&cache, &d_f)?;
                let d_log_s = [d_log_s];
                let mut groups = encoder.groups(&grads);
                groups.push(ParamGroup {
                    label: "log_s".into(),
                    values: std::slice::from_mut(&mut loss_state.log_s),
                    grads: &d_log_s,
                });
                adam.step(&mut groups)?;
                record.loss = loss;
                record.batch_mean = Some(step.batch_mean);
                record.lbar = Some(step.lbar);
                record.selected_fraction = Some(step.selected_fraction);
                record.scale = Some(loss_state.scale());
            }
            Some(h) => {
                let pred = h.forward(&f)?;
                let (loss, d_pred) = match cfg.mode {
                    Mode::L1 => rmloss::l1_loss(&pred, &yb)?,
                    _ => rmloss::mse_loss(&pred, &yb)?,
                };
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { iteration, batch });
                }
                let (head_grads, d_f) = h.backward(&f, &d_pred)?;
                let grads = encoder.backward(&cache, &d_f)?;
                let mut groups = encoder.groups(&grads);
                groups.extend(h.groups(&head_grads));
                adam.step(&mut groups)?;
                record.loss = loss;
            }
        }

        if iteration % cfg.eval_every == 0 || iteration == cfg.iterations {
            let v = validate_model(&encoder, head.as_ref(), &train, &val, &cfg.radius_grid)?;
            record.val_mae = Some(v.mae);
            record.radius = v.radius.as_ref().map(|c| c.radius);
            if best.as_ref().is_none_or(|b| v.mae < b.val_mae) {
                best = Some(Snapshot {
                    encoder: encoder.clone(),
                    head: head.clone(),
                    loss_state,
                    adam: adam.clone(),
                    iteration,
                    val_mae: v.mae,
                });
            }
        }
        log.push(record);
    }

    let best = best.expect("last iteration always validates");
    let radius = match best.head {
        None => {
            let train_f = best.encoder.embed(&train.0)?;
            let val_f = best.encoder.embed(&val.0)?;
            Some(tune_radius(
                &train_f,
                &train.1,
                &val_f,
                &val.1,
                &cfg.radius_grid,
            )?)
        }
        Some(_) => None,
    };
    Ok(TrainOutcome {
        encoder: best.encoder,
        head: best.head,
        loss_state: best.loss_state,
        adam: best.adam,
        radius,
        best_iteration: best.iteration,
        best_val_mae: best.val_mae,
        log,
    })
}
