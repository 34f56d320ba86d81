//! Reverse-time generators.
//!
//! All continuous-time samplers consume a true score `grad log p_t(x | y)`;
//! the discrete ancestral sampler consumes a noise predictor. Randomness comes
//! from a [`NoiseSource`](crate::noise::NoiseSource) addressed by step index,
//! so a run is a pure function of (model, condition, seed, config).
//!
//! Every sampler advances a batch of `n` samples that share one condition.
//! Each step draws the noise for the whole batch from one stream, and the
//! Langevin step size uses batch-averaged norms.

mod ddpm;
mod ode;
mod rk45;
mod sde;

use std::fmt;
use std::str::FromStr;

pub use ddpm::ddpm_ancestral;
pub use ode::ode_sample;
pub use rk45::{rk45, Rk45Output};
pub use sde::{em_reverse, langevin_corrector, langevin_step_size, pc_sample, CorrectorOutput};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Step count for the ancestral and Euler-Maruyama samplers.
    pub n_steps: usize,
    pub pc_prediction_steps: usize,
    pub pc_correction_steps: usize,
    pub snr: f64,
    pub ode_rtol: f64,
    pub ode_atol: f64,
    pub seed: u64,
    /// Record every k-th intermediate state.
    pub dump_every: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_steps: 1000,
            pc_prediction_steps: 500,
            pc_correction_steps: 1,
            snr: 0.16,
            ode_rtol: 1e-5,
            ode_atol: 1e-5,
            seed: 0,
            dump_every: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 || self.pc_prediction_steps == 0 {
            return Err(Error::InvalidArgument(
                "step counts must be at least 1".into(),
            ));
        }
        if !(self.snr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "snr must be positive, got {}",
                self.snr
            )));
        }
        if !(self.ode_rtol > 0.0 && self.ode_atol > 0.0) {
            return Err(Error::InvalidArgument(
                "ODE tolerances must be positive".into(),
            ));
        }
        if self.dump_every == Some(0) {
            return Err(Error::InvalidArgument(
                "dump interval must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ddpm,
    Em,
    Pc,
    Ode,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ddpm, Method::Em, Method::Pc, Method::Ode];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ddpm => "ddpm",
            Method::Em => "em",
            Method::Pc => "pc",
            Method::Ode => "ode",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown sampling method `{s}`")))
    }
}

/// Intermediate states, newest last; indices strictly decrease to 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub time: f64,
    pub state: Vec<f64>,
}

impl Trajectory {
    fn record(
        &mut self,
        every: Option<usize>,
        index: usize,
        total: usize,
        time: f64,
        state: &[f64],
    ) {
        let Some(k) = every else { return };
        if index == total || index == 0 || index % k == 0 {
            self.frames.push(Frame {
                index,
                time,
                state: state.to_vec(),
            });
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        self.frames.iter().map(|f| f.index).collect()
    }
}

/// A batch of `n` samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutput {
    pub x: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub trajectory: Trajectory,
    /// Score or noise-predictor evaluations of the whole batch.
    pub evals: usize,
    /// Corrector iterations skipped because the score vanished.
    pub skipped_corrections: usize,
}

impl SampleOutput {
    pub fn sample(&self, j: usize) -> &[f64] {
        &self.x[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks(self.dim)
    }
}

fn ensure_finite(x: &[f64], step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::SamplerDivergence { step })
    }
}

fn check_dims(expected: usize, n: usize, cond_dim: usize, cond: Option<&[f64]>) -> Result<()> {
    if expected == 0 || n == 0 {
        return Err(Error::InvalidArgument(
            "model dimension and batch size must be positive".into(),
        ));
    }
    match cond {
        Some(c) if c.len() != cond_dim => Err(Error::Shape {
            expected: cond_dim,
            got: c.len(),
        }),
        None if cond_dim != 0 => Err(Error::InvalidArgument("model expects a condition".into())),
        _ => Ok(()),
    }
}

/// Mean Euclidean norm of the rows of a row-stacked batch.
pub(crate) fn mean_row_norm(v: &[f64], n: usize) -> f64 {
    let d = v.len() / n;
    v.chunks(d)
        .map(|r| r.iter().map(|a| a * a).sum::<f64>().sqrt())
        .sum::<f64>()
        / n as f64
}
