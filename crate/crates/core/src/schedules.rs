//! Noise schedules.
//!
//! [`DiscreteSchedule`] holds the beta/alpha/alpha-bar ladder of the discrete
//! forward chain, indexed `t = 1..=T`, with the convention `alpha_bar(0) = 1`.
//! [`VeSchedule`] is the continuous variance-exploding law with diffusion
//! coefficient `g(t) = base^t` and marginal standard deviation
//! `sigma(t) = sqrt((base^(2t) - 1) / (2 ln base))`.

use crate::error::{check_len, Error, Result};

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;
pub const DEFAULT_SIGMA_BASE: f64 = 25.0;
pub const DEFAULT_T_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    posterior_betas: Vec<f64>,
    linear_range: Option<(f64, f64)>,
}

impl DiscreteSchedule {
    /// Linear betas from `beta_start` at `t = 1` to `beta_end` at `t = T`.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Schedule("step count must be at least 1".into()));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::Schedule(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start}..{beta_end}"
            )));
        }
        let betas = if steps == 1 {
            vec![beta_start]
        } else {
            let span = (beta_end - beta_start) / (steps - 1) as f64;
            (0..steps).map(|i| beta_start + span * i as f64).collect()
        };
        let mut s = Self::from_betas(betas)?;
        s.linear_range = Some((beta_start, beta_end));
        Ok(s)
    }

    pub fn default_linear() -> Self {
        Self::linear(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
            .expect("default schedule is valid")
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Schedule("empty beta sequence".into()));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::Schedule(format!("beta {b} outside (0, 1)")));
        }
        Ok(Self::build(betas))
    }

    /// Skips the `(0, 1)` check so degenerate ladders (beta = 0) can be
    /// exercised in tests.
    #[doc(hidden)]
    pub fn from_betas_unchecked(betas: Vec<f64>) -> Self {
        Self::build(betas)
    }

    fn build(betas: Vec<f64>) -> Self {
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        let posterior_betas = (0..betas.len())
            .map(|i| {
                let prev = if i == 0 { 1.0 } else { alpha_bars[i - 1] };
                let denom = 1.0 - alpha_bars[i];
                if denom == 0.0 {
                    0.0
                } else {
                    (1.0 - prev) / denom * betas[i]
                }
            })
            .collect();
        Self {
            betas,
            alphas,
            alpha_bars,
            posterior_betas,
            linear_range: None,
        }
    }

    /// `(beta_start, beta_end)` when built by [`DiscreteSchedule::linear`].
    pub fn linear_range(&self) -> Option<(f64, f64)> {
        self.linear_range
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn index(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.steps() {
            Err(Error::StepOutOfRange {
                t,
                max: self.steps(),
            })
        } else {
            Ok(t - 1)
        }
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// `alpha_bar(0)` is 1 by convention.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    pub fn posterior_beta(&self, t: usize) -> f64 {
        self.posterior_betas[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn posterior_betas(&self) -> &[f64] {
        &self.posterior_betas
    }

    /// One step of the forward chain: `sqrt(1 - beta_t) x_prev + sqrt(beta_t) eps`.
    pub fn forward_step(&self, x_prev: &[f64], t: usize, eps: &[f64]) -> Result<Vec<f64>> {
        let i = self.index(t)?;
        check_len(x_prev.len(), eps.len())?;
        let keep = self.alphas[i].sqrt();
        let noise = self.betas[i].sqrt();
        Ok(x_prev
            .iter()
            .zip(eps)
            .map(|(x, e)| keep * x + noise * e)
            .collect())
    }

    /// Closed-form `q(x_t | x_0)` draw: `sqrt(abar_t) x0 + sqrt(1 - abar_t) eps`.
    pub fn forward_marginal(&self, x0: &[f64], t: usize, eps: &[f64]) -> Result<Vec<f64>> {
        let i = self.index(t)?;
        check_len(x0.len(), eps.len())?;
        let keep = self.alpha_bars[i].sqrt();
        let noise = (1.0 - self.alpha_bars[i]).sqrt();
        Ok(x0
            .iter()
            .zip(eps)
            .map(|(x, e)| keep * x + noise * e)
            .collect())
    }

    /// Mean coefficients `(on x0, on xt)` of the tractable reverse posterior.
    pub fn posterior_coefficients(&self, t: usize) -> Result<(f64, f64)> {
        let i = self.index(t)?;
        let prev = self.alpha_bar(t - 1);
        let denom = 1.0 - self.alpha_bars[i];
        let c0 = prev.sqrt() * self.betas[i] / denom;
        let ct = self.alphas[i].sqrt() * (1.0 - prev) / denom;
        Ok((c0, ct))
    }

    /// Mean and variance of `q(x_{t-1} | x_t, x_0)`.
    pub fn posterior_params(&self, x0: &[f64], xt: &[f64], t: usize) -> Result<(Vec<f64>, f64)> {
        let (c0, ct) = self.posterior_coefficients(t)?;
        check_len(x0.len(), xt.len())?;
        let mean = x0.iter().zip(xt).map(|(a, b)| c0 * a + ct * b).collect();
        Ok((mean, self.posterior_betas[t - 1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VeSchedule {
    sigma_base: f64,
    t_min: f64,
    t_max: f64,
}

impl Default for VeSchedule {
    fn default() -> Self {
        Self {
            sigma_base: DEFAULT_SIGMA_BASE,
            t_min: DEFAULT_T_EPS,
            t_max: 1.0,
        }
    }
}

impl VeSchedule {
    pub fn new(sigma_base: f64, t_min: f64, t_max: f64) -> Result<Self> {
        if !(sigma_base > 1.0 && sigma_base.is_finite()) {
            return Err(Error::Schedule(format!(
                "sigma base must exceed 1, got {sigma_base}"
            )));
        }
        if !(t_min >= 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(Error::Schedule(format!(
                "need 0 <= t_min < t_max, got {t_min}..{t_max}"
            )));
        }
        Ok(Self {
            sigma_base,
            t_min,
            t_max,
        })
    }

    pub fn with_base(sigma_base: f64) -> Result<Self> {
        Self::new(sigma_base, DEFAULT_T_EPS, 1.0)
    }

    pub fn sigma_base(&self) -> f64 {
        self.sigma_base
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if (0.0..=self.t_max).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange { t, max: self.t_max })
        }
    }

    /// Marginal standard deviation of the perturbation kernel at time `t`.
    pub fn sigma(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.sigma_unchecked(t))
    }

    pub(crate) fn sigma_unchecked(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let ln_base = self.sigma_base.ln();
        ((2.0 * t * ln_base).exp_m1() / (2.0 * ln_base)).sqrt()
    }

    /// Diffusion coefficient `g(t) = base^t`.
    pub fn diffusion(&self, t: f64) -> f64 {
        self.sigma_base.powf(t)
    }

    /// `g(t)^2 = base^(2t)`.
    pub fn diffusion_sq(&self, t: f64) -> f64 {
        self.sigma_base.powf(2.0 * t)
    }

    /// `x0 + sigma(t) eps`.
    pub fn marginal(&self, x0: &[f64], t: f64, eps: &[f64]) -> Result<Vec<f64>> {
        let s = self.sigma(t)?;
        check_len(x0.len(), eps.len())?;
        Ok(x0.iter().zip(eps).map(|(x, e)| x + s * e).collect())
    }

    /// The time grid `t_i = i t_max / n` for `i = n..=0`.
    pub fn grid(&self, n: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..=n)
            .rev()
            .map(move |i| (i, i as f64 * self.t_max / n as f64))
    }
}
