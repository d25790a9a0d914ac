//! Joint estimation of sparse Gaussian graphical models under node-based
//! structure: perturbed nodes (PNJGL, two classes) and co-hub nodes (CNJGL,
//! any number of classes), with graphical-lasso baselines, block screening,
//! synthetic benchmarks and recovery metrics.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod baselines;
pub mod cli;
pub mod cnjgl;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod model;
pub mod pnjgl;
pub mod prox;
pub mod rcon;
pub mod screening;

pub use admm::{AdmmOptions, Diagnostics, Status};
pub use error::{NjglError, Result};
pub use linalg::Mat;
pub use model::{BlockPartition, EmpiricalModel, GroupNorm, PenaltyConfig, PrecisionSet};
