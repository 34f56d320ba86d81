use super::{check_dims, ensure_finite, SampleOutput, SamplerConfig, Trajectory};
use crate::error::{check_len, Result};
use crate::noise::{slot, NoiseSource};
use crate::schedules::DiscreteSchedule;
use crate::scores::NoisePredictor;

/// Ancestral sampling down the discrete chain with reverse variance equal to
/// the posterior variance. The final step adds no noise.
///
/// `cfg.n_steps` is ignored; the chain length is the schedule's.
pub fn ddpm_ancestral<P, N>(
    model: &P,
    schedule: &DiscreteSchedule,
    cond: Option<&[f64]>,
    n: usize,
    noise: &N,
    cfg: &SamplerConfig,
) -> Result<SampleOutput>
where
    P: NoisePredictor + ?Sized,
    N: NoiseSource + ?Sized,
{
    cfg.validate()?;
    let d = model.dim();
    check_dims(d, n, model.cond_dim(), cond)?;
    let steps = schedule.steps();
    let mut x = noise.normal(0, slot::PRIOR, n * d);
    let mut trajectory = Trajectory::default();
    trajectory.record(cfg.dump_every, steps, steps, steps as f64, &x);
    for i in (1..=steps).rev() {
        let eps = model.predict_noise_batch(&x, n, cond, i);
        check_len(n * d, eps.len())?;
        let alpha = schedule.alpha(i);
        let coef = (1.0 - alpha) / (1.0 - schedule.alpha_bar(i)).sqrt();
        let inv_sqrt_alpha = 1.0 / alpha.sqrt();
        for (xv, e) in x.iter_mut().zip(&eps) {
            *xv = inv_sqrt_alpha * (*xv - coef * e);
        }
        if i > 1 {
            let sigma = schedule.posterior_beta(i).sqrt();
            let z = noise.normal(i as u64, slot::PREDICTOR, n * d);
            for (xv, zv) in x.iter_mut().zip(&z) {
                *xv += sigma * zv;
            }
        }
        ensure_finite(&x, i)?;
        trajectory.record(cfg.dump_every, i - 1, steps, (i - 1) as f64, &x);
    }
    Ok(SampleOutput {
        x,
        n,
        dim: d,
        trajectory,
        evals: steps,
        skipped_corrections: 0,
    })
}
