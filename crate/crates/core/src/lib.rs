//! Differentially private Wasserstein GAN training with a moments accountant.
//!
//! The crate trains a WGAN whose critic updates are privatized by per-example
//! gradient clipping plus Gaussian noise, tracks the cumulative privacy cost
//! with a moments accountant, and evaluates generators with inception-style
//! scores. Everything is deterministic given a seed: all randomness flows
//! through counter-based streams ([`ndnum::RngStream`]), so runs replay
//! bitwise and checkpoints resume exactly.
//!
//! Module tour:
//! - [`ndnum`] — dense `f64` matrices with pinned summation order, and the
//!   counter-based random streams every draw in the system goes through.
//! - [`mlp`] — small fully connected networks with hand-written
//!   backpropagation that yields *per-example* parameter gradients.
//! - [`dp`] — clipping, Gaussian mechanism, and closed-form noise
//!   calibration formulas.
//! - [`accountant`] — the moments accountant: per-step log-MGF of the
//!   privacy loss (by adaptive quadrature for the subsampled Gaussian),
//!   additive composition, and tail-bound queries.
//! - [`train`] — the training loop: noisy critic steps, data-free generator
//!   steps, budget enforcement, and metrics.
//! - [`checkpoint`] — binary snapshot format for bitwise resume.
//! - [`data`] — IDX image I/O, normalization/pooling, diagnosis-code
//!   encoding, and synthetic corpora (EHR records, digit glyphs).
//! - [`scores`] — label-model training, inception score, and the
//!   stability-based generate score.
//! - [`config`] — flat key/value run configuration files.
//! - [`cli`] — subcommand implementations behind the `ppgan` binary.

pub mod accountant;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod dp;
mod error;
pub mod mlp;
pub mod ndnum;
pub mod scores;
pub mod train;

pub use error::{Error, Result};

/// Component stream identifiers: every consumer of randomness derives its
/// streams from one of these, so the components never share a stream.
pub mod streams {
    /// Training: network init, batch selection, prior noise, privacy noise.
    pub const TRAIN: u64 = 1;
    /// Data synthesis (digit corpora, EHR records).
    pub const DATA: u64 = 2;
    /// Evaluation (score sampling, label-model training).
    pub const EVAL: u64 = 3;
}
