//! Training objectives, the Adam optimizer and the epoch loop.
//!
//! Both objectives regress the network head onto a unit-variance target:
//! the injected noise for the discrete chain, and the negated noise (a
//! sigma-scaled score) for the VE process.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data_io::{Pair, PairedDataset};
use crate::error::{check_len, Error, Result};
use crate::schedules::{DiscreteSchedule, VeSchedule};
use crate::scores::{MlpDenoiser, Parameterization};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub min_epochs: usize,
    pub plateau_window: usize,
    /// Relative improvement an epoch must reach over the trailing mean.
    pub plateau_threshold: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 2,
            min_epochs: 100,
            plateau_window: 20,
            plateau_threshold: 0.01,
            max_epochs: 2000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.learning_rate, self.adam_eps];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument(
                "learning rate and eps must be positive".into(),
            ));
        }
        for b in [self.adam_beta1, self.adam_beta2] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidArgument(format!(
                    "Adam beta {b} outside [0, 1)"
                )));
            }
        }
        if !(self.plateau_threshold > 0.0 && self.plateau_threshold < 1.0) {
            return Err(Error::InvalidArgument(
                "plateau threshold must be in (0, 1)".into(),
            ));
        }
        if self.batch_size == 0 || self.plateau_window == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidArgument(
                "batch size, plateau window and epoch cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Bias-corrected Adam update in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) -> Result<()> {
        check_len(self.m.len(), params.len())?;
        check_len(self.m.len(), grads.len())?;
        self.step += 1;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossCurve {
    pub losses: Vec<f64>,
    pub seconds: Vec<f64>,
}

impl LossCurve {
    pub fn epochs(&self) -> usize {
        self.losses.len()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,seconds\n");
        for (i, (l, t)) in self.losses.iter().zip(&self.seconds).enumerate() {
            s.push_str(&format!("{},{:.8e},{:.8e}\n", i + 1, l, t));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Simplified noise-regression loss over the discrete chain.
    Ddpm(DiscreteSchedule),
    /// Denoising score matching under the VE kernel, `t ~ U[t_min, t_max]`.
    DsmVe(VeSchedule),
}

impl Objective {
    pub fn for_model(model: &MlpDenoiser) -> Self {
        match model.parameterization() {
            Parameterization::Noise(s) => Objective::Ddpm(s.clone()),
            Parameterization::ScaledScore(v) => Objective::DsmVe(*v),
        }
    }
}

/// Network inputs and regression targets for one noised mini-batch.
#[derive(Debug, Clone)]
pub struct NoisedBatch {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub len: usize,
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Draws `t` and noise per pair and builds the regression problem.
pub fn noised_batch(
    model: &MlpDenoiser,
    objective: &Objective,
    batch: &[&Pair],
    rng: &mut ChaCha8Rng,
) -> Result<NoisedBatch> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut inputs = Vec::with_capacity(batch.len() * model.mlp().input_dim());
    let mut targets = Vec::with_capacity(batch.len() * model.x_dim());
    for pair in batch {
        let cond = pair.cond_opt();
        match objective {
            Objective::Ddpm(s) => {
                let step = rng.gen_range(1..=s.steps());
                let eps = normal_vec(rng, pair.target.len());
                let xt = s.forward_marginal(&pair.target, step, &eps)?;
                let time = model.time_input(step as f64);
                model.push_input(&xt, cond, time, &mut inputs)?;
                let g = model.skip_gain(time);
                targets.extend(eps.iter().zip(&xt).map(|(e, x)| e - g * x));
            }
            Objective::DsmVe(v) => {
                let t = rng.gen_range(v.t_min()..=v.t_max());
                let eps = normal_vec(rng, pair.target.len());
                let xt = v.marginal(&pair.target, t, &eps)?;
                let time = model.time_input(t);
                model.push_input(&xt, cond, time, &mut inputs)?;
                let g = model.skip_gain(time);
                targets.extend(eps.iter().zip(&xt).map(|(e, x)| -e - g * x));
            }
        }
    }
    Ok(NoisedBatch {
        inputs,
        targets,
        len: batch.len(),
    })
}

/// Mean over the batch of the squared error norm, and its parameter gradient.
pub fn regression_loss(model: &MlpDenoiser, nb: &NoisedBatch) -> Result<(f64, Vec<f64>)> {
    let tape = model.mlp().forward_tape(&nb.inputs, nb.len)?;
    let scale = 1.0 / nb.len as f64;
    let mut loss = 0.0;
    let grad_out: Vec<f64> = tape
        .output()
        .iter()
        .zip(&nb.targets)
        .map(|(p, t)| {
            let r = p - t;
            loss += r * r;
            2.0 * r * scale
        })
        .collect();
    let grads = model.mlp().backward(&tape, &grad_out)?;
    Ok((loss * scale, grads))
}

pub fn ddpm_loss(
    model: &MlpDenoiser,
    schedule: &DiscreteSchedule,
    batch: &[&Pair],
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<f64>)> {
    let nb = noised_batch(model, &Objective::Ddpm(schedule.clone()), batch, rng)?;
    regression_loss(model, &nb)
}

pub fn dsm_ve_loss(
    model: &MlpDenoiser,
    ve: &VeSchedule,
    batch: &[&Pair],
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<f64>)> {
    let nb = noised_batch(model, &Objective::DsmVe(*ve), batch, rng)?;
    regression_loss(model, &nb)
}

/// `KL(q(x_T | x_0) || N(0, I))` in closed form.
pub fn vlb_terminal_kl(schedule: &DiscreteSchedule, x0: &[f64]) -> f64 {
    let ab = schedule.alpha_bar(schedule.steps());
    let d = x0.len() as f64;
    let sq: f64 = x0.iter().map(|v| v * v).sum();
    // -a - ln(1 - a) >= 0, evaluated without cancellation for small a.
    let per_dim = -ab - (-ab).ln_1p();
    0.5 * (ab * sq + d * per_dim)
}

/// A model the epoch loop can optimize.
pub trait Trainable {
    fn params_mut(&mut self) -> &mut [f64];

    fn num_params(&self) -> usize;

    fn batch_loss(
        &self,
        objective: &Objective,
        batch: &[&Pair],
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Vec<f64>)>;
}

impl Trainable for MlpDenoiser {
    fn params_mut(&mut self) -> &mut [f64] {
        self.mlp_mut().params_mut()
    }

    fn num_params(&self) -> usize {
        self.mlp().num_params()
    }

    fn batch_loss(
        &self,
        objective: &Objective,
        batch: &[&Pair],
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Vec<f64>)> {
        let nb = noised_batch(self, objective, batch, rng)?;
        regression_loss(self, &nb)
    }
}

/// True once `loss` failed to improve on the trailing-window mean by the
/// configured relative threshold.
pub fn plateaued(history: &[f64], loss: f64, cfg: &TrainConfig) -> bool {
    if history.len() < cfg.plateau_window {
        return false;
    }
    let window = &history[history.len() - cfg.plateau_window..];
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    loss >= (1.0 - cfg.plateau_threshold) * mean
}

/// Runs epochs of shuffled mini-batches until the plateau rule fires (after
/// `min_epochs`) or the epoch cap is reached.
pub fn train<M: Trainable>(
    model: &mut M,
    objective: &Objective,
    dataset: &PairedDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<LossCurve> {
    cfg.validate()?;
    if dataset.pairs.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.num_params());
    let mut order: Vec<usize> = (0..dataset.pairs.len()).collect();
    let mut curve = LossCurve::default();
    for epoch in 1..=cfg.max_epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Pair> = chunk.iter().map(|&i| &dataset.pairs[i]).collect();
            let (loss, grads) = model.batch_loss(objective, &batch, &mut rng)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            adam.step(model.params_mut(), &grads, cfg)?;
            total += loss;
            batches += 1;
        }
        let loss = total / batches as f64;
        let stop = epoch >= cfg.min_epochs && plateaued(&curve.losses, loss, cfg);
        curve.losses.push(loss);
        curve.seconds.push(start.elapsed().as_secs_f64());
        on_epoch(epoch, loss);
        if stop {
            break;
        }
    }
    Ok(curve)
}

/// Objective value over the whole dataset with noise drawn from `seed`.
pub fn dataset_loss<M: Trainable>(
    model: &M,
    objective: &Objective,
    dataset: &PairedDataset,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut n = 0;
    for chunk in dataset.pairs.chunks(256) {
        let batch: Vec<&Pair> = chunk.iter().collect();
        let (loss, _) = model.batch_loss(objective, &batch, &mut rng)?;
        total += loss * batch.len() as f64;
        n += batch.len();
    }
    Ok(total / n as f64)
}
