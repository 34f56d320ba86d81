//! Fully connected network with exact reverse-mode gradients.
//!
//! Parameters live in one flat buffer, layer by layer: the `out x in`
//! row-major weight matrix followed by the `out` bias vector. Hidden layers
//! apply the activation; the last layer is affine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// `x * sigmoid(x)`
    Silu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Silu => z / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

/// Cached layer inputs and pre-activations from a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    batch: usize,
    /// `inputs[l]` is the `batch x widths[l]` input of layer `l`; the final
    /// entry is the network output.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
}

impl ForwardTape {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().expect("tape has an output")
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    /// Uniform weights in `+-1/sqrt(fan_in)`, zero biases.
    pub fn new(widths: Vec<usize>, activation: Activation, seed: u64) -> Result<Self> {
        let mut mlp = Self::zeros(widths, activation)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..mlp.layers() {
            let bound = 1.0 / (mlp.widths[l] as f64).sqrt();
            let (w, _) = mlp.layer_range(l);
            for p in &mut mlp.params[w] {
                *p = rng.gen_range(-bound..bound);
            }
        }
        Ok(mlp)
    }

    pub fn zeros(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|w| *w == 0) {
            return Err(Error::InvalidArgument(format!(
                "network needs at least two positive widths, got {widths:?}"
            )));
        }
        let n = param_count(&widths);
        Ok(Self {
            widths,
            activation,
            params: vec![0.0; n],
        })
    }

    pub fn from_params(
        widths: Vec<usize>,
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut mlp = Self::zeros(widths, activation)?;
        check_len(mlp.params.len(), params.len())?;
        mlp.params = params;
        Ok(mlp)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Index ranges of the weight matrix and bias vector of layer `l`.
    pub fn layer_range(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let start = param_count(&self.widths[..=l]);
        let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
        let w_end = start + fan_in * fan_out;
        (start..w_end, w_end..w_end + fan_out)
    }

    pub fn weight(&self, l: usize) -> &[f64] {
        &self.params[self.layer_range(l).0]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        &self.params[self.layer_range(l).1]
    }

    /// Forward pass over `batch` row-major input rows.
    pub fn forward(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        let tape = self.forward_tape(inputs, batch)?;
        Ok(tape.inputs.into_iter().last().unwrap())
    }

    pub fn forward_tape(&self, inputs: &[f64], batch: usize) -> Result<ForwardTape> {
        check_len(batch * self.input_dim(), inputs.len())?;
        let mut tape = ForwardTape {
            batch,
            inputs: vec![inputs.to_vec()],
            pre: Vec::with_capacity(self.layers() - 1),
        };
        for l in 0..self.layers() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let mut z = vec![0.0; batch * fan_out];
            for row in z.chunks_exact_mut(fan_out) {
                row.copy_from_slice(self.bias(l));
            }
            gemm_xwt(
                tape.inputs.last().unwrap(),
                self.weight(l),
                &mut z,
                batch,
                fan_in,
                fan_out,
            );
            if l + 1 < self.layers() {
                let act = z.iter().map(|v| self.activation.apply(*v)).collect();
                tape.pre.push(z);
                tape.inputs.push(act);
            } else {
                tape.inputs.push(z);
            }
        }
        Ok(tape)
    }

    /// Parameter gradient of a scalar loss given `dL/d(output)`.
    pub fn backward(&self, tape: &ForwardTape, grad_output: &[f64]) -> Result<Vec<f64>> {
        let batch = tape.batch;
        check_len(batch * self.output_dim(), grad_output.len())?;
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = grad_output.to_vec();
        for l in (0..self.layers()).rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let (w_range, b_range) = self.layer_range(l);
            gemm_dtx(
                &delta,
                &tape.inputs[l],
                &mut grads[w_range],
                batch,
                fan_out,
                fan_in,
            );
            let gb = &mut grads[b_range];
            for row in delta.chunks_exact(fan_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; batch * fan_in];
                gemm_dw(&delta, self.weight(l), &mut prev, batch, fan_out, fan_in);
                for (p, z) in prev.iter_mut().zip(&tape.pre[l - 1]) {
                    *p *= self.activation.derivative(*z);
                }
                delta = prev;
            }
        }
        Ok(grads)
    }
}

// c[b x n] += x[b x k] * w[n x k]^T
fn gemm_xwt(x: &[f64], w: &[f64], c: &mut [f64], b: usize, k: usize, n: usize) {
    assert!(x.len() >= b * k && w.len() >= n * k && c.len() >= b * n);
    // SAFETY: slice lengths checked above cover every strided access.
    unsafe {
        matrixmultiply::dgemm(
            b,
            k,
            n,
            1.0,
            x.as_ptr(),
            k as isize,
            1,
            w.as_ptr(),
            1,
            k as isize,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

// g[n x k] += d[b x n]^T * x[b x k]
fn gemm_dtx(d: &[f64], x: &[f64], g: &mut [f64], b: usize, n: usize, k: usize) {
    assert!(d.len() >= b * n && x.len() >= b * k && g.len() >= n * k);
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            n,
            b,
            k,
            1.0,
            d.as_ptr(),
            1,
            n as isize,
            x.as_ptr(),
            k as isize,
            1,
            1.0,
            g.as_mut_ptr(),
            k as isize,
            1,
        );
    }
}

// p[b x k] += d[b x n] * w[n x k]
fn gemm_dw(d: &[f64], w: &[f64], p: &mut [f64], b: usize, n: usize, k: usize) {
    assert!(d.len() >= b * n && w.len() >= n * k && p.len() >= b * k);
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            b,
            n,
            k,
            1.0,
            d.as_ptr(),
            n as isize,
            1,
            w.as_ptr(),
            k as isize,
            1,
            1.0,
            p.as_mut_ptr(),
            k as isize,
            1,
        );
    }
}
