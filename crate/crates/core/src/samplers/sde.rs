use super::{check_dims, ensure_finite, mean_row_norm, SampleOutput, SamplerConfig, Trajectory};
use crate::error::{check_len, Result};
use crate::noise::{slot, NoiseSource};
use crate::schedules::VeSchedule;
use crate::scores::ScoreField;

fn prior<S, N>(
    score: &S,
    ve: &VeSchedule,
    cond: Option<&[f64]>,
    n: usize,
    noise: &N,
) -> Result<Vec<f64>>
where
    S: ScoreField + ?Sized,
    N: NoiseSource + ?Sized,
{
    let d = score.dim();
    check_dims(d, n, score.cond_dim(), cond)?;
    let sigma = ve.sigma(ve.t_max())?;
    Ok(noise
        .normal(0, slot::PRIOR, n * d)
        .into_iter()
        .map(|z| sigma * z)
        .collect())
}

fn eval<S: ScoreField + ?Sized>(
    score: &S,
    x: &[f64],
    n: usize,
    cond: Option<&[f64]>,
    t: f64,
) -> Result<Vec<f64>> {
    let s = score.score_batch(x, n, cond, t);
    check_len(x.len(), s.len())?;
    Ok(s)
}

/// One reverse Euler-Maruyama step from `t` to `t - dt`. `z = None` drops the
/// diffusion term.
fn em_step(ve: &VeSchedule, x: &mut [f64], s: &[f64], t: f64, dt: f64, z: Option<&[f64]>) {
    let g = ve.diffusion(t);
    let drift = g * g * dt;
    for (xv, sv) in x.iter_mut().zip(s) {
        *xv += drift * sv;
    }
    if let Some(z) = z {
        let diff = g * dt.sqrt();
        for (xv, zv) in x.iter_mut().zip(z) {
            *xv += diff * zv;
        }
    }
}

/// Reverse-time Euler-Maruyama over `n_steps` uniform steps from `t_max` to 0.
pub fn em_reverse<S, N>(
    score: &S,
    ve: &VeSchedule,
    cond: Option<&[f64]>,
    n: usize,
    noise: &N,
    cfg: &SamplerConfig,
) -> Result<SampleOutput>
where
    S: ScoreField + ?Sized,
    N: NoiseSource + ?Sized,
{
    cfg.validate()?;
    let mut x = prior(score, ve, cond, n, noise)?;
    let steps = cfg.n_steps;
    let dt = ve.t_max() / steps as f64;
    let mut trajectory = Trajectory::default();
    trajectory.record(cfg.dump_every, steps, steps, ve.t_max(), &x);
    for i in (1..=steps).rev() {
        let t = i as f64 * dt;
        let s = eval(score, &x, n, cond, t)?;
        let z = noise.normal(i as u64, slot::PREDICTOR, x.len());
        em_step(ve, &mut x, &s, t, dt, Some(&z));
        ensure_finite(&x, i)?;
        trajectory.record(cfg.dump_every, i - 1, steps, (i - 1) as f64 * dt, &x);
    }
    Ok(SampleOutput {
        x,
        n,
        dim: score.dim(),
        trajectory,
        evals: steps,
        skipped_corrections: 0,
    })
}

/// Langevin step size `(r |z|)^2 / |s|^2` with both norms averaged over the
/// `n` rows of the batch, or `None` when the score vanishes.
pub fn langevin_step_size(snr: f64, z: &[f64], s: &[f64], n: usize) -> Option<f64> {
    let s_norm = mean_row_norm(s, n);
    if s_norm == 0.0 {
        return None;
    }
    let ratio = snr * mean_row_norm(z, n) / s_norm;
    Some(ratio * ratio)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorOutput {
    pub x: Vec<f64>,
    pub evals: usize,
    pub skipped: usize,
}

/// `iterations` Langevin updates `x += gamma/2 s + sqrt(gamma) z` at fixed `t`.
/// Noise for iteration `j` is drawn from slot `CORRECTOR + j` of `step`.
#[allow(clippy::too_many_arguments)]
pub fn langevin_corrector<S, N>(
    score: &S,
    mut x: Vec<f64>,
    n: usize,
    cond: Option<&[f64]>,
    t: f64,
    snr: f64,
    iterations: usize,
    noise: &N,
    step: u64,
) -> Result<CorrectorOutput>
where
    S: ScoreField + ?Sized,
    N: NoiseSource + ?Sized,
{
    let mut skipped = 0;
    for j in 0..iterations {
        let s = eval(score, &x, n, cond, t)?;
        let z = noise.normal(step, slot::CORRECTOR + j as u64, x.len());
        let Some(gamma) = langevin_step_size(snr, &z, &s, n) else {
            skipped += 1;
            continue;
        };
        let (half, root) = (0.5 * gamma, gamma.sqrt());
        for ((xv, sv), zv) in x.iter_mut().zip(&s).zip(&z) {
            *xv += half * sv + root * zv;
        }
    }
    Ok(CorrectorOutput {
        x,
        evals: iterations,
        skipped,
    })
}

/// Predictor-corrector sampling: each of `pc_prediction_steps` reverse EM
/// steps is followed by `pc_correction_steps` Langevin iterations at the new
/// time (floored at `t_min`). The last predictor step is noise-free.
pub fn pc_sample<S, N>(
    score: &S,
    ve: &VeSchedule,
    cond: Option<&[f64]>,
    n: usize,
    noise: &N,
    cfg: &SamplerConfig,
) -> Result<SampleOutput>
where
    S: ScoreField + ?Sized,
    N: NoiseSource + ?Sized,
{
    cfg.validate()?;
    let mut x = prior(score, ve, cond, n, noise)?;
    let steps = cfg.pc_prediction_steps;
    let dt = ve.t_max() / steps as f64;
    let mut evals = 0;
    let mut skipped = 0;
    let mut trajectory = Trajectory::default();
    trajectory.record(cfg.dump_every, steps, steps, ve.t_max(), &x);
    for i in (1..=steps).rev() {
        let t = i as f64 * dt;
        let s = eval(score, &x, n, cond, t)?;
        evals += 1;
        if i > 1 {
            let z = noise.normal(i as u64, slot::PREDICTOR, x.len());
            em_step(ve, &mut x, &s, t, dt, Some(&z));
        } else {
            em_step(ve, &mut x, &s, t, dt, None);
        }
        let t_next = ((i - 1) as f64 * dt).max(ve.t_min());
        let c = langevin_corrector(
            score,
            x,
            n,
            cond,
            t_next,
            cfg.snr,
            cfg.pc_correction_steps,
            noise,
            i as u64,
        )?;
        x = c.x;
        evals += c.evals;
        skipped += c.skipped;
        ensure_finite(&x, i)?;
        trajectory.record(cfg.dump_every, i - 1, steps, (i - 1) as f64 * dt, &x);
    }
    Ok(SampleOutput {
        x,
        n,
        dim: score.dim(),
        trajectory,
        evals,
        skipped_corrections: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{CounterNoise, ZeroNoise};
    use crate::samplers::test_support::moments;
    use crate::scores::PerturbedGaussianScore;

    struct Zero(usize);

    impl ScoreField for Zero {
        fn dim(&self) -> usize {
            self.0
        }
        fn score(&self, x: &[f64], _: Option<&[f64]>, _: f64) -> Vec<f64> {
            vec![0.0; x.len()]
        }
    }

    #[test]
    fn zero_score_without_noise_keeps_prior() {
        let ve = VeSchedule::default();
        let cfg = SamplerConfig {
            n_steps: 1,
            ..Default::default()
        };
        let out = em_reverse(&Zero(3), &ve, None, 1, &ZeroNoise, &cfg).unwrap();
        assert_eq!(out.x, vec![0.0; 3]);
        struct PriorOnly;
        impl NoiseSource for PriorOnly {
            fn normal(&self, step: u64, slot: u64, dim: usize) -> Vec<f64> {
                if step == 0 && slot == crate::noise::slot::PRIOR {
                    (0..dim).map(|i| i as f64 + 1.0).collect()
                } else {
                    vec![0.0; dim]
                }
            }
        }
        let out = em_reverse(&Zero(3), &ve, None, 1, &PriorOnly, &cfg).unwrap();
        let sigma = ve.sigma(1.0).unwrap();
        assert_eq!(out.x, vec![sigma, 2.0 * sigma, 3.0 * sigma]);
    }

    #[test]
    fn step_size_arithmetic() {
        let z = [2.0, 0.0];
        let s = [0.0, 4.0];
        assert!((langevin_step_size(0.16, &z, &s, 1).unwrap() - 0.0064).abs() < 1e-15);
        assert_eq!(langevin_step_size(0.16, &z, &[0.0, 0.0], 1), None);
        // Batch of two: mean norms 1.5 and 2.5.
        let z = [1.0, 0.0, 0.0, 2.0];
        let s = [3.0, 4.0, 0.0, 0.0];
        let g = langevin_step_size(0.5, &z, &s, 2).unwrap();
        assert!((g - (0.5f64 * 1.5 / 2.5).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn corrector_identity_and_skips() {
        let x = vec![0.3, -0.2];
        let out = langevin_corrector(
            &Zero(2),
            x.clone(),
            1,
            None,
            0.5,
            0.16,
            0,
            &CounterNoise::new(1),
            3,
        )
        .unwrap();
        assert_eq!(out.x, x);
        assert_eq!(out.evals, 0);
        let out = langevin_corrector(
            &Zero(2),
            x.clone(),
            1,
            None,
            0.5,
            0.16,
            4,
            &CounterNoise::new(1),
            3,
        )
        .unwrap();
        assert_eq!((out.x, out.evals, out.skipped), (x, 4, 4));
    }

    #[test]
    fn corrector_equilibrates_to_target_gaussian() {
        let ve = VeSchedule::default();
        let t = 0.3;
        let oracle = PerturbedGaussianScore::new(ve, 2);
        let var = oracle.marginal_variance(t);
        let n = 4000;
        let start: Vec<f64> = (0..n).flat_map(|_| [1.0, -1.0]).collect();
        let out = langevin_corrector(
            &oracle,
            start,
            n,
            None,
            t,
            0.16,
            400,
            &CounterNoise::new(5),
            0,
        )
        .unwrap();
        let (mean, v) = moments(&out.x, 2);
        for j in 0..2 {
            assert!(mean[j].abs() < 0.1 * var.sqrt(), "{mean:?}");
            assert!((v[j] / var - 1.0).abs() < 0.08, "{v:?} vs {var}");
        }
    }

    #[test]
    fn pc_without_correction_differs_from_em_by_last_noise() {
        let ve = VeSchedule::default();
        let oracle = PerturbedGaussianScore::new(ve, 2);
        let cfg = SamplerConfig {
            n_steps: 100,
            pc_prediction_steps: 100,
            pc_correction_steps: 0,
            ..Default::default()
        };
        let noise = CounterNoise::new(12);
        let em = em_reverse(&oracle, &ve, None, 3, &noise, &cfg).unwrap();
        let pc = pc_sample(&oracle, &ve, None, 3, &noise, &cfg).unwrap();
        let dt = 0.01;
        let z1 = noise.normal(1, crate::noise::slot::PREDICTOR, 6);
        for j in 0..6 {
            let expected = ve.diffusion(dt) * dt.sqrt() * z1[j];
            assert!((em.x[j] - pc.x[j] - expected).abs() < 1e-12);
        }
        assert_eq!(pc.evals, 100);
    }

    #[test]
    fn eval_counts_and_determinism() {
        let ve = VeSchedule::default();
        let oracle = PerturbedGaussianScore::new(ve, 2);
        let cfg = SamplerConfig {
            n_steps: 40,
            pc_prediction_steps: 30,
            pc_correction_steps: 2,
            dump_every: Some(10),
            ..Default::default()
        };
        let noise = CounterNoise::new(3);
        let em = em_reverse(&oracle, &ve, None, 2, &noise, &cfg).unwrap();
        assert_eq!(em.evals, 40);
        assert_eq!(em, em_reverse(&oracle, &ve, None, 2, &noise, &cfg).unwrap());
        let pc = pc_sample(&oracle, &ve, None, 2, &noise, &cfg).unwrap();
        assert_eq!(pc.evals, 90);
        assert_eq!(pc.trajectory.indices(), vec![30, 20, 10, 0]);
        assert_eq!(pc, pc_sample(&oracle, &ve, None, 2, &noise, &cfg).unwrap());
    }

    struct Narrow(VeSchedule);

    impl ScoreField for Narrow {
        fn dim(&self) -> usize {
            1
        }
        fn score(&self, x: &[f64], _: Option<&[f64]>, t: f64) -> Vec<f64> {
            let s = self.0.sigma(t).unwrap();
            x.iter().map(|v| -v / (0.25 + s * s)).collect()
        }
    }

    #[test]
    fn em_moment_error_at_most_doubles_when_halving_steps() {
        // Data variance 0.25 makes the discretization bias visible above
        // Monte-Carlo noise; common random numbers across step counts.
        let ve = VeSchedule::default();
        let field = Narrow(ve);
        let err = |steps: usize| {
            let cfg = SamplerConfig {
                n_steps: steps,
                ..Default::default()
            };
            let out = em_reverse(&field, &ve, None, 20_000, &CounterNoise::new(2), &cfg).unwrap();
            let (_, v) = moments(&out.x, 1);
            (v[0] - 0.25).abs()
        };
        let (e25, e50) = (err(25), err(50));
        assert!(e25 <= 2.0 * e50 + 0.01, "{e25} {e50}");
    }
}
