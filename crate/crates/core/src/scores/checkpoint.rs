//! Plain-text checkpoint format.
//!
//! ```text
//! SCOREFLOW-CKPT v1
//! <name> <rows> <cols>
//! <row 0 values>
//! ...
//! ```
//!
//! Values are written row-major, one matrix row per line, with 9 significant
//! digits in scientific notation. Reading a file this module wrote and
//! writing it back reproduces it byte for byte.
//!
//! A denoiser checkpoint holds `meta` (x_dim, cond_dim, embed_dim,
//! parameterization, activation, preconditioning flag), either `schedule` (T, beta_start, beta_end)
//! or `ve` (sigma_base, t_min, t_max), then `layer<l>.weight` / `layer<l>.bias`.

use std::fmt::Write as _;
use std::path::Path;

use super::denoiser::{MlpDenoiser, Parameterization};
use super::mlp::{Activation, Mlp};
use crate::error::{Error, Result};
use crate::fmt_num as fmt_value;
use crate::schedules::{DiscreteSchedule, VeSchedule};

pub const CHECKPOINT_MAGIC: &str = "SCOREFLOW-CKPT v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(rows * cols, values.len(), "tensor shape");
        Self {
            name: name.into(),
            rows,
            cols,
            values,
        }
    }

    pub fn row(name: impl Into<String>, values: Vec<f64>) -> Self {
        let n = values.len();
        Self::new(name, 1, n, values)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(CHECKPOINT_MAGIC);
        out.push('\n');
        for t in &self.tensors {
            let _ = writeln!(out, "{} {} {}", t.name, t.rows, t.cols);
            for row in t.values.chunks(t.cols.max(1)) {
                let line: Vec<String> = row.iter().map(|v| fmt_value(*v)).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(l) if l.trim_end() == CHECKPOINT_MAGIC => {}
            _ => {
                return Err(Error::format(
                    origin,
                    format!("missing `{CHECKPOINT_MAGIC}` header"),
                ))
            }
        }
        let mut tensors = Vec::new();
        while let Some(header) = lines.next() {
            if header.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = header.split_whitespace().collect();
            let [name, rows, cols] = parts[..] else {
                return Err(Error::format(
                    origin,
                    format!("bad tensor header `{header}`"),
                ));
            };
            let parse_dim = |s: &str| {
                s.parse::<usize>().map_err(|_| {
                    Error::format(origin, format!("bad dimension `{s}` in `{header}`"))
                })
            };
            let (rows, cols) = (parse_dim(rows)?, parse_dim(cols)?);
            let mut values = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                let line = lines.next().ok_or_else(|| {
                    Error::format(origin, format!("tensor `{name}` truncated at row {r}"))
                })?;
                for tok in line.split_whitespace() {
                    let v = tok.parse::<f64>().map_err(|_| {
                        Error::format(origin, format!("bad value `{tok}` in tensor `{name}`"))
                    })?;
                    values.push(v);
                }
                if values.len() != (r + 1) * cols {
                    return Err(Error::format(
                        origin,
                        format!("tensor `{name}` row {r} has wrong length"),
                    ));
                }
            }
            tensors.push(Tensor::new(name, rows, cols, values));
        }
        Ok(Self { tensors })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

impl MlpDenoiser {
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mlp = self.mlp();
        let (kind, schedule) = match self.parameterization() {
            Parameterization::Noise(s) => {
                let (b0, b1) = s.linear_range().ok_or_else(|| {
                    Error::InvalidArgument("only linear schedules can be checkpointed".into())
                })?;
                (0.0, Tensor::row("schedule", vec![s.steps() as f64, b0, b1]))
            }
            Parameterization::ScaledScore(v) => (
                1.0,
                Tensor::row("ve", vec![v.sigma_base(), v.t_min(), v.t_max()]),
            ),
        };
        let act = match mlp.activation() {
            Activation::Silu => 0.0,
            Activation::Tanh => 1.0,
        };
        let mut tensors = vec![
            Tensor::row(
                "meta",
                vec![
                    self.x_dim() as f64,
                    self.cond_dim() as f64,
                    self.embed_dim() as f64,
                    kind,
                    act,
                    f64::from(u8::from(self.is_preconditioned())),
                ],
            ),
            schedule,
        ];
        for l in 0..mlp.layers() {
            let (fan_in, fan_out) = (mlp.widths()[l], mlp.widths()[l + 1]);
            tensors.push(Tensor::new(
                format!("layer{l}.weight"),
                fan_out,
                fan_in,
                mlp.weight(l).to_vec(),
            ));
            tensors.push(Tensor::row(format!("layer{l}.bias"), mlp.bias(l).to_vec()));
        }
        Ok(Checkpoint { tensors })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let missing = |n: &str| Error::InvalidArgument(format!("checkpoint lacks tensor `{n}`"));
        let meta = ckpt.get("meta").ok_or_else(|| missing("meta"))?;
        if meta.values.len() != 6 {
            return Err(Error::InvalidArgument(
                "meta tensor must hold 6 values".into(),
            ));
        }
        let preconditioned = meta.values[5] != 0.0;
        let as_dim = |v: f64| v as usize;
        let (x_dim, cond_dim, embed_dim) = (
            as_dim(meta.values[0]),
            as_dim(meta.values[1]),
            as_dim(meta.values[2]),
        );
        let param = if meta.values[3] == 0.0 {
            let s = ckpt.get("schedule").ok_or_else(|| missing("schedule"))?;
            let [steps, b0, b1] = s.values[..] else {
                return Err(Error::InvalidArgument(
                    "schedule tensor must hold 3 values".into(),
                ));
            };
            Parameterization::Noise(DiscreteSchedule::linear(steps as usize, b0, b1)?)
        } else {
            let v = ckpt.get("ve").ok_or_else(|| missing("ve"))?;
            let [base, t_min, t_max] = v.values[..] else {
                return Err(Error::InvalidArgument(
                    "ve tensor must hold 3 values".into(),
                ));
            };
            Parameterization::ScaledScore(VeSchedule::new(base, t_min, t_max)?)
        };
        let activation = if meta.values[4] == 0.0 {
            Activation::Silu
        } else {
            Activation::Tanh
        };

        let mut widths = Vec::new();
        let mut params = Vec::new();
        let mut l = 0;
        while let Some(w) = ckpt.get(&format!("layer{l}.weight")) {
            let b = ckpt
                .get(&format!("layer{l}.bias"))
                .ok_or_else(|| missing("bias"))?;
            if widths.is_empty() {
                widths.push(w.cols);
            } else if *widths.last().unwrap() != w.cols {
                return Err(Error::InvalidArgument(format!(
                    "layer{l} input width mismatch"
                )));
            }
            if b.values.len() != w.rows {
                return Err(Error::InvalidArgument(format!(
                    "layer{l} bias width mismatch"
                )));
            }
            widths.push(w.rows);
            params.extend_from_slice(&w.values);
            params.extend_from_slice(&b.values);
            l += 1;
        }
        let mlp = Mlp::from_params(widths, activation, params)?;
        Ok(
            MlpDenoiser::from_mlp(mlp, x_dim, cond_dim, embed_dim, param)?
                .with_preconditioning(preconditioned),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::read(path)?)
    }
}
