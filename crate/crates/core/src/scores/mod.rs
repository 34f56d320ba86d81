//! Score fields: analytic oracles, the trainable MLP denoiser, and the
//! adapters between noise predictions and true scores.
//!
//! Every sampler consumes true scores `grad_x log p_t(x)`. Networks are
//! trained either as noise predictors (discrete chain) or as
//! sigma-scaled-score predictors (VE process) and are converted at the edge.

mod analytic;
mod checkpoint;
mod denoiser;
mod embedding;
mod mlp;

pub use analytic::{
    gaussian_log_density, gmm_log_density, GaussianScore, GmmScore, OptimalGaussianNoise,
    PerturbedGaussianScore,
};
pub use checkpoint::{Checkpoint, Tensor, CHECKPOINT_MAGIC};
pub use denoiser::{
    MlpDenoiser, Parameterization, VeNetworkScore, DEFAULT_EMBED_DIM, DEFAULT_HIDDEN,
};
pub use embedding::time_embedding;
pub use mlp::{Activation, ForwardTape, Mlp};

use crate::error::{Error, Result};
use crate::schedules::DiscreteSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDomain {
    Discrete,
    Continuous,
}

/// A vector field approximating `grad_x log p_t(x | y)` over continuous time.
pub trait ScoreField: Sync {
    fn dim(&self) -> usize;

    fn cond_dim(&self) -> usize {
        0
    }

    fn time_domain(&self) -> TimeDomain {
        TimeDomain::Continuous
    }

    fn score(&self, x: &[f64], cond: Option<&[f64]>, t: f64) -> Vec<f64>;

    /// Scores of `n` row-stacked states sharing one condition and time.
    fn score_batch(&self, xs: &[f64], n: usize, cond: Option<&[f64]>, t: f64) -> Vec<f64> {
        batch_rows(xs, n, |x| self.score(x, cond, t))
    }
}

/// Predicts the injected unit noise of the discrete forward chain at step `t`.
pub trait NoisePredictor: Sync {
    fn dim(&self) -> usize;

    fn cond_dim(&self) -> usize {
        0
    }

    fn predict_noise(&self, x: &[f64], cond: Option<&[f64]>, step: usize) -> Vec<f64>;

    fn predict_noise_batch(
        &self,
        xs: &[f64],
        n: usize,
        cond: Option<&[f64]>,
        step: usize,
    ) -> Vec<f64> {
        batch_rows(xs, n, |x| self.predict_noise(x, cond, step))
    }
}

fn batch_rows(xs: &[f64], n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let d = xs.len() / n;
    let mut out = Vec::with_capacity(xs.len());
    for row in xs.chunks(d.max(1)).take(n) {
        out.extend(f(row));
    }
    out
}

impl<S: ScoreField + ?Sized> ScoreField for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn cond_dim(&self) -> usize {
        (**self).cond_dim()
    }
    fn time_domain(&self) -> TimeDomain {
        (**self).time_domain()
    }
    fn score(&self, x: &[f64], cond: Option<&[f64]>, t: f64) -> Vec<f64> {
        (**self).score(x, cond, t)
    }
    fn score_batch(&self, xs: &[f64], n: usize, cond: Option<&[f64]>, t: f64) -> Vec<f64> {
        (**self).score_batch(xs, n, cond, t)
    }
}

impl<P: NoisePredictor + ?Sized> NoisePredictor for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn cond_dim(&self) -> usize {
        (**self).cond_dim()
    }
    fn predict_noise(&self, x: &[f64], cond: Option<&[f64]>, step: usize) -> Vec<f64> {
        (**self).predict_noise(x, cond, step)
    }
    fn predict_noise_batch(
        &self,
        xs: &[f64],
        n: usize,
        cond: Option<&[f64]>,
        step: usize,
    ) -> Vec<f64> {
        (**self).predict_noise_batch(xs, n, cond, step)
    }
}

/// `-eps_hat / noise_scale`, where the scale is `sqrt(1 - abar_t)` or `sigma(t)`.
pub fn eps_to_score(eps_hat: &[f64], noise_scale: f64) -> Result<Vec<f64>> {
    if !(noise_scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise scale must be positive, got {noise_scale}"
        )));
    }
    Ok(eps_hat.iter().map(|e| -e / noise_scale).collect())
}

pub fn score_to_eps(score: &[f64], noise_scale: f64) -> Result<Vec<f64>> {
    if !(noise_scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise scale must be positive, got {noise_scale}"
        )));
    }
    Ok(score.iter().map(|s| -s * noise_scale).collect())
}

/// Score of the discrete marginal `q(x_t)` implied by a noise predictor.
pub fn discrete_score<P: NoisePredictor + ?Sized>(
    predictor: &P,
    schedule: &DiscreteSchedule,
    x: &[f64],
    cond: Option<&[f64]>,
    step: usize,
) -> Result<Vec<f64>> {
    if step == 0 || step > schedule.steps() {
        return Err(Error::StepOutOfRange {
            t: step,
            max: schedule.steps(),
        });
    }
    let eps = predictor.predict_noise(x, cond, step);
    eps_to_score(&eps, (1.0 - schedule.alpha_bar(step)).sqrt())
}
