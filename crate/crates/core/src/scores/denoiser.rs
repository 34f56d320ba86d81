use super::embedding::write_time_embedding;
use super::mlp::{Activation, Mlp};
use super::{NoisePredictor, ScoreField, TimeDomain};
use crate::error::{check_len, Error, Result};
use crate::schedules::{DiscreteSchedule, VeSchedule};

pub const DEFAULT_EMBED_DIM: usize = 32;
pub const DEFAULT_HIDDEN: [usize; 3] = [256, 256, 256];

/// What the network head predicts and how its time input is normalized.
#[derive(Debug, Clone, PartialEq)]
pub enum Parameterization {
    /// Unit noise of the discrete chain; time input is `step / T`.
    Noise(DiscreteSchedule),
    /// `sigma(t) * score`, i.e. the negated unit noise of the VE kernel;
    /// time input is `t` itself.
    ScaledScore(VeSchedule),
}

impl Parameterization {
    pub fn time_domain(&self) -> TimeDomain {
        match self {
            Parameterization::Noise(_) => TimeDomain::Discrete,
            Parameterization::ScaledScore(_) => TimeDomain::Continuous,
        }
    }
}

/// MLP noise/score network with input layout `[x, y, embed(t)]`.
///
/// When preconditioned (the default), the state input is rescaled by
/// [`MlpDenoiser::input_scale`] and the head adds the fixed linear skip
/// [`MlpDenoiser::skip_gain`]` * x`. The MLP then only fits the residual from
/// the standard-normal optimum, which keeps the reverse chains stable for
/// undertrained networks on high-dimensional states.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpDenoiser {
    mlp: Mlp,
    x_dim: usize,
    cond_dim: usize,
    embed_dim: usize,
    param: Parameterization,
    preconditioned: bool,
}

impl MlpDenoiser {
    pub fn new(
        x_dim: usize,
        cond_dim: usize,
        embed_dim: usize,
        hidden: &[usize],
        param: Parameterization,
        seed: u64,
    ) -> Result<Self> {
        let mlp = Mlp::new(
            Self::layout(x_dim, cond_dim, embed_dim, hidden)?,
            Activation::Silu,
            seed,
        )?;
        Ok(Self {
            mlp,
            x_dim,
            cond_dim,
            embed_dim,
            param,
            preconditioned: true,
        })
    }

    pub fn from_mlp(
        mlp: Mlp,
        x_dim: usize,
        cond_dim: usize,
        embed_dim: usize,
        param: Parameterization,
    ) -> Result<Self> {
        if embed_dim % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "embedding dimension must be even, got {embed_dim}"
            )));
        }
        check_len(x_dim + cond_dim + embed_dim, mlp.input_dim())?;
        check_len(x_dim, mlp.output_dim())?;
        Ok(Self {
            mlp,
            x_dim,
            cond_dim,
            embed_dim,
            param,
            preconditioned: true,
        })
    }

    fn layout(
        x_dim: usize,
        cond_dim: usize,
        embed_dim: usize,
        hidden: &[usize],
    ) -> Result<Vec<usize>> {
        if x_dim == 0 || embed_dim % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "need x_dim > 0 and even embed_dim, got {x_dim}, {embed_dim}"
            )));
        }
        let mut widths = vec![x_dim + cond_dim + embed_dim];
        widths.extend_from_slice(hidden);
        widths.push(x_dim);
        Ok(widths)
    }

    /// Switches input scaling and the linear skip on or off.
    pub fn with_preconditioning(mut self, on: bool) -> Self {
        self.preconditioned = on;
        self
    }

    pub fn is_preconditioned(&self) -> bool {
        self.preconditioned
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn parameterization(&self) -> &Parameterization {
        &self.param
    }

    /// Network time input for a discrete step or continuous time.
    pub fn time_input(&self, t: f64) -> f64 {
        match &self.param {
            Parameterization::Noise(s) => t / s.steps() as f64,
            Parameterization::ScaledScore(_) => t,
        }
    }

    /// Factor applied to the state before it enters the network. VE states
    /// are divided by `sqrt(1 + sigma(t)^2)` so the input stays O(1) at
    /// every noise level; discrete-chain states are already unit scale.
    /// Always 1 without preconditioning.
    pub fn input_scale(&self, time_input: f64) -> f64 {
        if !self.preconditioned {
            return 1.0;
        }
        match &self.param {
            Parameterization::Noise(_) => 1.0,
            Parameterization::ScaledScore(ve) => {
                let sigma = ve.sigma_unchecked(time_input.max(ve.t_min()));
                1.0 / (1.0 + sigma * sigma).sqrt()
            }
        }
    }

    /// Gain of the fixed linear skip `head = gain * x + mlp(...)`, the
    /// head-space optimum for standard-normal data. Zero without
    /// preconditioning.
    pub fn skip_gain(&self, time_input: f64) -> f64 {
        if !self.preconditioned {
            return 0.0;
        }
        match &self.param {
            Parameterization::Noise(s) => {
                let step = ((time_input * s.steps() as f64).round() as usize).clamp(1, s.steps());
                (1.0 - s.alpha_bar(step)).sqrt()
            }
            Parameterization::ScaledScore(ve) => {
                let sigma = ve.sigma_unchecked(time_input.max(ve.t_min()));
                -sigma / (1.0 + sigma * sigma)
            }
        }
    }

    /// Appends one input row `[c * x, y, embed(time_input)]` to `out`, where
    /// `c` is [`Self::input_scale`].
    pub fn push_input(
        &self,
        x: &[f64],
        cond: Option<&[f64]>,
        time_input: f64,
        out: &mut Vec<f64>,
    ) -> Result<()> {
        check_len(self.x_dim, x.len())?;
        let c = self.input_scale(time_input);
        out.extend(x.iter().map(|v| c * v));
        match cond {
            Some(c) => {
                check_len(self.cond_dim, c.len())?;
                out.extend_from_slice(c);
            }
            None if self.cond_dim == 0 => {}
            None => return Err(Error::InvalidArgument("model expects a condition".into())),
        }
        write_time_embedding(time_input, out, self.embed_dim);
        Ok(())
    }

    /// Head output for one sample at a normalized time input.
    pub fn forward(&self, x: &[f64], cond: Option<&[f64]>, time_input: f64) -> Result<Vec<f64>> {
        self.forward_batch(x, 1, cond, time_input)
    }

    /// Head output for `n` row-stacked states sharing a condition and time.
    pub fn forward_batch(
        &self,
        xs: &[f64],
        n: usize,
        cond: Option<&[f64]>,
        time_input: f64,
    ) -> Result<Vec<f64>> {
        check_len(n * self.x_dim, xs.len())?;
        if n == 0 {
            return Ok(Vec::new());
        }
        let width = self.mlp.input_dim();
        let mut first = Vec::with_capacity(width);
        self.push_input(&xs[..self.x_dim], cond, time_input, &mut first)?;
        let tail = &first[self.x_dim..];
        let c = self.input_scale(time_input);
        let mut rows = Vec::with_capacity(n * width);
        for x in xs.chunks(self.x_dim) {
            rows.extend(x.iter().map(|v| c * v));
            rows.extend_from_slice(tail);
        }
        let mut out = self.mlp.forward(&rows, n)?;
        let g = self.skip_gain(time_input);
        for (o, x) in out.iter_mut().zip(xs) {
            *o += g * x;
        }
        Ok(out)
    }

    fn forward_or_nan(
        &self,
        xs: &[f64],
        n: usize,
        cond: Option<&[f64]>,
        time_input: f64,
    ) -> Vec<f64> {
        self.forward_batch(xs, n, cond, time_input)
            .unwrap_or_else(|_| vec![f64::NAN; n * self.x_dim])
    }
}

impl NoisePredictor for MlpDenoiser {
    fn dim(&self) -> usize {
        self.x_dim
    }

    fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    fn predict_noise(&self, x: &[f64], cond: Option<&[f64]>, step: usize) -> Vec<f64> {
        self.predict_noise_batch(x, 1, cond, step)
    }

    fn predict_noise_batch(
        &self,
        xs: &[f64],
        n: usize,
        cond: Option<&[f64]>,
        step: usize,
    ) -> Vec<f64> {
        let out = self.forward_or_nan(xs, n, cond, self.time_input(step as f64));
        match self.param {
            Parameterization::Noise(_) => out,
            Parameterization::ScaledScore(_) => out.into_iter().map(|v| -v).collect(),
        }
    }
}

/// True-score view of a VE-trained network: `score = head / sigma(t)`.
#[derive(Debug, Clone, Copy)]
pub struct VeNetworkScore<'a> {
    model: &'a MlpDenoiser,
    ve: VeSchedule,
}

impl<'a> VeNetworkScore<'a> {
    pub fn new(model: &'a MlpDenoiser) -> Result<Self> {
        match model.param {
            Parameterization::ScaledScore(ve) => Ok(Self { model, ve }),
            Parameterization::Noise(_) => Err(Error::InvalidArgument(
                "network was trained on the discrete chain, not the VE process".into(),
            )),
        }
    }
}

impl ScoreField for VeNetworkScore<'_> {
    fn dim(&self) -> usize {
        self.model.x_dim
    }

    fn cond_dim(&self) -> usize {
        self.model.cond_dim
    }

    fn score(&self, x: &[f64], cond: Option<&[f64]>, t: f64) -> Vec<f64> {
        self.score_batch(x, 1, cond, t)
    }

    fn score_batch(&self, xs: &[f64], n: usize, cond: Option<&[f64]>, t: f64) -> Vec<f64> {
        let sigma = self.ve.sigma_unchecked(t.max(self.ve.t_min()));
        let head = self.model.forward_or_nan(xs, n, cond, t);
        head.into_iter().map(|h| h / sigma).collect()
    }
}
