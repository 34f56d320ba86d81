//! Conditional diffusion and score-based generative sampling.
//!
//! Discrete (DDPM) and variance-exploding SDE noise processes, their training
//! objectives, four reverse samplers, Monte-Carlo ensembles and the image
//! metrics used to score them.

pub mod cli;
pub mod data_io;
pub mod error;
pub mod metrics;
pub mod noise;
pub mod samplers;
pub mod schedules;
pub mod scores;
pub mod training;
pub mod uncertainty;

pub use error::{Error, Result};

/// Nine significant digits, scientific notation. Used by every text format.
pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v:.8e}")
}
