//! Variance-reduced stochastic optimization for finite-sum problems: SARAH
//! with fixed or Barzilai-Borwein step sizes, regularized surrogate drivers,
//! baselines, and a benchmark harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod meta;
pub mod objective;
pub mod optimizers;
pub mod par;
pub mod rng;
pub mod surrogate;

pub use error::{Error, Result};
