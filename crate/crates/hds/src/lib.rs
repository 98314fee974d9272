//! Stochastic dynamics of driven spin lattices with dressed-pair encodings.
//!
//! The crate simulates ensembles of Schrödinger trajectories for chains of
//! spin-1/2 pairs under noisy continuous drives, builds the effective coupling
//! models those drives engineer, and checks a trapped-ion realization of the
//! same interactions against its idealized target. Experiments are wired
//! together in the companion runner crate and exposed through the `hds`
//! command-line binary.

// Validation comparisons are written as `!(x > 0.0)` so NaN fails them, and
// the numeric kernels index both sides of a matrix symmetrically.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod effective;
pub mod ion;
pub mod model;
pub mod noise;
pub mod observables;
pub mod propagate;
pub mod spinops;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HdsError {
    #[error("config: {0}")]
    Config(String),
    #[error("model: {0}")]
    Model(String),
    #[error("numerics: {0}")]
    Numerics(String),
    #[error("observable: {0}")]
    Observable(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
