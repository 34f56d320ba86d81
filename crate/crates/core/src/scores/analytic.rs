use std::f64::consts::PI;

use super::{NoisePredictor, ScoreField, TimeDomain};
use crate::error::{Error, Result};
use crate::schedules::{DiscreteSchedule, VeSchedule};

/// Score of the isotropic Gaussian `N(mu, variance I)`.
#[derive(Debug, Clone)]
pub struct GaussianScore {
    mu: Vec<f64>,
    variance: f64,
}

impl GaussianScore {
    pub fn new(mu: Vec<f64>, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "variance must be positive, got {variance}"
            )));
        }
        Ok(Self { mu, variance })
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mu)
            .map(|(x, m)| -(x - m) / self.variance)
            .collect()
    }
}

impl ScoreField for GaussianScore {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn score(&self, x: &[f64], _cond: Option<&[f64]>, _t: f64) -> Vec<f64> {
        self.eval(x)
    }
}

pub fn gaussian_log_density(x: &[f64], mu: &[f64], variance: f64) -> f64 {
    let d = x.len() as f64;
    let sq: f64 = x.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * sq / variance - 0.5 * d * (2.0 * PI * variance).ln()
}

/// Score of the isotropic mixture `sum_k w_k N(mu_k, v_k I)`.
#[derive(Debug, Clone)]
pub struct GmmScore {
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    variances: Vec<f64>,
}

impl GmmScore {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != variances.len() {
            return Err(Error::InvalidArgument(
                "mixture needs matching, non-empty weights/means/variances".into(),
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument(
                "mixture weights must be positive".into(),
            ));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(
                "mixture weights must sum to 1".into(),
            ));
        }
        if variances.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument(
                "mixture variances must be positive".into(),
            ));
        }
        let d = means[0].len();
        if means.iter().any(|m| m.len() != d) {
            return Err(Error::InvalidArgument(
                "mixture means differ in dimension".into(),
            ));
        }
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            means,
            variances,
        })
    }

    fn log_terms(&self, x: &[f64]) -> Vec<f64> {
        self.log_weights
            .iter()
            .zip(&self.means)
            .zip(&self.variances)
            .map(|((lw, m), v)| lw + gaussian_log_density(x, m, *v))
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let logs = self.log_terms(x);
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let resp: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = resp.iter().sum();
        let mut out = vec![0.0; x.len()];
        for ((r, m), v) in resp.iter().zip(&self.means).zip(&self.variances) {
            let w = r / total;
            for ((o, xi), mi) in out.iter_mut().zip(x).zip(m) {
                *o -= w * (xi - mi) / v;
            }
        }
        out
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let logs = self.log_terms(x);
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
    }
}

impl ScoreField for GmmScore {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn score(&self, x: &[f64], _cond: Option<&[f64]>, _t: f64) -> Vec<f64> {
        self.eval(x)
    }
}

pub fn gmm_log_density(x: &[f64], weights: &[f64], means: &[Vec<f64>], variances: &[f64]) -> f64 {
    GmmScore::new(weights.to_vec(), means.to_vec(), variances.to_vec())
        .map(|g| g.log_density(x))
        .unwrap_or(f64::NAN)
}

/// Exact score of standard-normal data pushed through the VE kernel:
/// the marginal at time `t` is `N(0, (1 + sigma(t)^2) I)`.
#[derive(Debug, Clone, Copy)]
pub struct PerturbedGaussianScore {
    ve: VeSchedule,
    dim: usize,
}

impl PerturbedGaussianScore {
    pub fn new(ve: VeSchedule, dim: usize) -> Self {
        Self { ve, dim }
    }

    pub fn marginal_variance(&self, t: f64) -> f64 {
        let s = self.ve.sigma_unchecked(t.max(0.0));
        1.0 + s * s
    }
}

impl ScoreField for PerturbedGaussianScore {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score(&self, x: &[f64], _cond: Option<&[f64]>, t: f64) -> Vec<f64> {
        let var = self.marginal_variance(t);
        x.iter().map(|v| -v / var).collect()
    }

    fn score_batch(&self, xs: &[f64], _n: usize, cond: Option<&[f64]>, t: f64) -> Vec<f64> {
        self.score(xs, cond, t)
    }
}

/// Bayes-optimal noise predictor for standard-normal data under the discrete
/// chain. `x_t` and `eps` are jointly Gaussian with unit marginals and
/// correlation `sqrt(1 - abar_t)`, so `E[eps | x_t] = sqrt(1 - abar_t) x_t`.
#[derive(Debug, Clone)]
pub struct OptimalGaussianNoise {
    schedule: DiscreteSchedule,
    dim: usize,
}

impl OptimalGaussianNoise {
    pub fn new(schedule: DiscreteSchedule, dim: usize) -> Self {
        Self { schedule, dim }
    }
}

impl NoisePredictor for OptimalGaussianNoise {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_noise(&self, x: &[f64], _cond: Option<&[f64]>, step: usize) -> Vec<f64> {
        let c = (1.0 - self.schedule.alpha_bar(step)).sqrt();
        x.iter().map(|v| c * v).collect()
    }

    fn predict_noise_batch(
        &self,
        xs: &[f64],
        _n: usize,
        cond: Option<&[f64]>,
        step: usize,
    ) -> Vec<f64> {
        self.predict_noise(xs, cond, step)
    }
}

impl ScoreField for OptimalGaussianNoise {
    fn dim(&self) -> usize {
        self.dim
    }

    fn time_domain(&self) -> TimeDomain {
        TimeDomain::Discrete
    }

    /// Treats `t` as a step index.
    fn score(&self, x: &[f64], _cond: Option<&[f64]>, _t: f64) -> Vec<f64> {
        x.iter().map(|v| -v).collect()
    }
}
