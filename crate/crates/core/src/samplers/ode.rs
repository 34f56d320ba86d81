use super::rk45::integrate;
use super::{check_dims, ensure_finite, Frame, SampleOutput, SamplerConfig, Trajectory};
use crate::error::Result;
use crate::noise::{slot, NoiseSource};
use crate::schedules::VeSchedule;
use crate::scores::ScoreField;

/// Probability-flow ODE `dx/dt = -1/2 g(t)^2 s(x, t)` integrated from `t_max`
/// down to `t_min`. Only the prior draw is random.
///
/// The batch is integrated as one flattened system with a shared step size.
/// Trajectory frames are the accepted integrator steps, indexed by the number
/// of steps remaining.
pub fn ode_sample<S, N>(
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
    let d = score.dim();
    check_dims(d, n, score.cond_dim(), cond)?;
    let sigma = ve.sigma(ve.t_max())?;
    let x_init: Vec<f64> = noise
        .normal(0, slot::PRIOR, n * d)
        .into_iter()
        .map(|z| sigma * z)
        .collect();

    let mut shape_error = None;
    let field = |t: f64, x: &[f64]| {
        let s = score.score_batch(x, n, cond, t);
        if s.len() != x.len() {
            shape_error.get_or_insert(s.len());
            return vec![f64::NAN; x.len()];
        }
        let c = -0.5 * ve.diffusion_sq(t);
        s.into_iter().map(|v| c * v).collect()
    };
    let mut frames: Vec<(f64, Vec<f64>)> = Vec::new();
    let keep = cfg.dump_every.is_some();
    if keep {
        frames.push((ve.t_max(), x_init.clone()));
    }
    let out = integrate(
        field,
        ve.t_max(),
        ve.t_min(),
        &x_init,
        cfg.ode_rtol,
        cfg.ode_atol,
        |t, x| {
            if keep {
                frames.push((t, x.to_vec()));
            }
        },
    );
    if let Some(got) = shape_error {
        return Err(crate::error::Error::Shape {
            expected: n * d,
            got,
        });
    }
    let out = out?;
    ensure_finite(&out.x, 0)?;

    let mut trajectory = Trajectory::default();
    if let Some(k) = cfg.dump_every {
        let total = frames.len() - 1;
        for (j, (time, state)) in frames.into_iter().enumerate() {
            let index = total - j;
            if index == total || index == 0 || index % k == 0 {
                trajectory.frames.push(Frame { index, time, state });
            }
        }
    }
    Ok(SampleOutput {
        x: out.x,
        n,
        dim: d,
        trajectory,
        evals: out.evals,
        skipped_corrections: 0,
    })
}
