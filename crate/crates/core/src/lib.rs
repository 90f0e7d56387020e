//! Regression metric learning.
//!
//! Trains a small encoder so that distances between learned representations
//! match distances between labels, predicts labels by distance-weighted
//! nearest neighbours in that space, and measures how isometric the learned
//! space is.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index loops read closer to the matrix formulas than iterator chains
#![allow(clippy::needless_range_loop)]

pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod encoder;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod metrics;
pub mod rmloss;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use linalg::Matrix;
