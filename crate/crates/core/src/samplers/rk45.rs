//! Dormand-Prince 5(4) with per-component error control.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Fifth-order solution minus the embedded fourth-order one.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const UNDERFLOW: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Rk45Output {
    pub x: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

/// Integrates `dx/dt = f(t, x)` from `t_start` to `t_end` (either direction).
///
/// A step is accepted when every component satisfies
/// `|err_i| <= atol + rtol * max(|x_i|, |x_new_i|)`.
pub fn rk45<F>(
    f: F,
    t_start: f64,
    t_end: f64,
    x_init: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Rk45Output>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    integrate(f, t_start, t_end, x_init, rtol, atol, |_, _| {})
}

pub(crate) fn integrate<F, O>(
    mut f: F,
    t_start: f64,
    t_end: f64,
    x_init: &[f64],
    rtol: f64,
    atol: f64,
    mut on_accept: O,
) -> Result<Rk45Output>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
    O: FnMut(f64, &[f64]),
{
    let span = t_end - t_start;
    if !(span != 0.0 && span.is_finite()) {
        return Err(Error::InvalidArgument(
            "integration span must be nonzero and finite".into(),
        ));
    }
    if !(rtol > 0.0 && atol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let d = x_init.len();
    let mut x = x_init.to_vec();
    let mut t = t_start;
    let mut h = span;
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(f(t, &x));
    let mut evals = 1;
    let (mut accepted, mut rejected) = (0, 0);
    let mut stage = vec![0.0; d];
    let mut x_new = vec![0.0; d];

    while (t_end - t) * span.signum() > 0.0 {
        let remaining = t_end - t;
        let last = h.abs() >= remaining.abs();
        if last {
            h = remaining;
        }
        k.truncate(1);
        for s in 1..7 {
            for (i, v) in stage.iter_mut().enumerate() {
                let acc: f64 = A[s].iter().zip(&k).map(|(a, kj)| a * kj[i]).sum();
                *v = x[i] + h * acc;
            }
            k.push(f(t + C[s] * h, &stage));
        }
        evals += 6;
        // The last stage is evaluated at the fifth-order solution.
        x_new.copy_from_slice(&stage);

        let mut err: f64 = 0.0;
        for i in 0..d {
            let e: f64 = h * E.iter().zip(&k).map(|(c, kj)| c * kj[i]).sum::<f64>();
            let scale = atol + rtol * x[i].abs().max(x_new[i].abs());
            err = err.max((e / scale).abs());
        }
        if err.is_nan() {
            err = f64::INFINITY;
        }

        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut x, &mut x_new);
            let k7 = k.pop().expect("seven stages");
            k.clear();
            k.push(k7);
            accepted += 1;
            on_accept(t, &x);
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).min(MAX_FACTOR)
            };
            h *= factor;
        } else {
            rejected += 1;
            h *= (SAFETY * err.powf(-0.2)).max(MIN_FACTOR);
            if h.abs() < UNDERFLOW * span.abs() {
                return Err(Error::StepUnderflow { t, h });
            }
        }
    }
    Ok(Rk45Output {
        x,
        accepted,
        rejected,
        evals,
    })
}
