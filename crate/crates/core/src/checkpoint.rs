//! Versioned JSON checkpoints.
//!
//! A checkpoint holds everything needed to rebuild a trained model and to
//! resume optimisation: layer sizes, the activation name, flattened weights
//! and biases, the optional linear head, the Adam moments, the loss state,
//! the tuned radius, the label normalization and the resolved experiment
//! config. Floats are written with shortest round-trip formatting, so a
//! save/load cycle is bitwise exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::NormParams;
use crate::encoder::{Activation, AdamState, EncoderParams, HeadParams};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rmloss::LossState;
use crate::trainer::{Mode, TrainOutcome};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub mode: Mode,
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    /// Row-major `layer_sizes[l+1] × layer_sizes[l]` per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub head: Option<HeadParams>,
    pub adam: AdamState,
    pub loss_state: LossState,
    /// Prediction radius (metric loss only).
    pub radius: Option<f64>,
    pub d_y: usize,
    pub norm_params: NormParams,
    pub best_iteration: usize,
    pub best_val_mae: f64,
    /// The configuration that produced this checkpoint.
    pub config: serde_json::Value,
}

impl Checkpoint {
    pub fn from_outcome(
        outcome: &TrainOutcome,
        mode: Mode,
        norm_params: &NormParams,
        config: serde_json::Value,
    ) -> Self {
        let enc = &outcome.encoder;
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            mode,
            layer_sizes: enc.layer_sizes().to_vec(),
            activation: enc.activation(),
            weights: enc.weights().iter().map(|w| w.data().to_vec()).collect(),
            biases: enc.biases().to_vec(),
            head: outcome.head.clone(),
            adam: outcome.adam.clone(),
            loss_state: outcome.loss_state,
            radius: outcome.radius.as_ref().map(|c| c.radius),
            d_y: norm_params.mean.len(),
            norm_params: norm_params.clone(),
            best_iteration: outcome.best_iteration,
            best_val_mae: outcome.best_val_mae,
            config,
        }
    }

    pub fn encoder(&self) -> Result<EncoderParams> {
        EncoderParams::from_parts(
            self.layer_sizes.clone(),
            self.activation,
            self.weights.clone(),
            self.biases.clone(),
        )
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Checks the internal consistency of a loaded file.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported checkpoint format version {}",
                self.format_version
            )));
        }
        let enc = self.encoder()?;
        if !enc.all_finite() {
            return Err(Error::InvalidInput(
                "checkpoint holds non-finite parameters".into(),
            ));
        }
        if self.norm_params.mean.len() != self.d_y || self.norm_params.scale.len() != self.d_y {
            return Err(Error::InvalidInput(
                "normalization does not match d_y".into(),
            ));
        }
        match (self.mode, &self.head, self.radius) {
            (Mode::Rm, None, Some(r)) if r > 0.0 && r.is_finite() => Ok(()),
            (Mode::Rm, _, _) => Err(Error::InvalidInput(
                "metric-loss checkpoint needs a positive radius and no head".into(),
            )),
            (_, Some(h), _) => {
                if h.weight.shape() != (self.d_y, enc.output_dim()) || h.bias.len() != self.d_y {
                    return Err(Error::InvalidInput(
                        "head shape does not match encoder".into(),
                    ));
                }
                Ok(())
            }
            (_, None, _) => Err(Error::InvalidInput(
                "baseline checkpoint without a head".into(),
            )),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingPath(path.to_path_buf()));
        }
        let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        ck.validate()?;
        Ok(ck)
    }

    /// Predictions in normalized label units for already embedded inputs.
    pub fn head_predict(&self, f: &Matrix) -> Result<Option<Matrix>> {
        self.head.as_ref().map(|h| h.forward(f)).transpose()
    }
}
