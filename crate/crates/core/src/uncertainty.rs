//! Monte-Carlo replicate ensembles: mean sample, pixel-wise standard
//! deviation and a scalar uncertainty summary.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{evaluate, Image, MetricReport};
use crate::noise::RowStreams;

pub const DEFAULT_REPLICATES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct McEnsemble {
    pub replicates: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Population (divide by K) standard deviation per element.
    pub std: Vec<f64>,
    pub mean_uncertainty: f64,
}

impl McEnsemble {
    pub fn from_replicates(replicates: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = replicates.first() else {
            return Err(Error::InvalidArgument(
                "ensemble needs at least one replicate".into(),
            ));
        };
        let d = first.len();
        if d == 0 || replicates.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument(
                "replicates must share a nonzero length".into(),
            ));
        }
        let k = replicates.len() as f64;
        // Shifted by the first replicate so identical replicates give their
        // common value back exactly.
        let mut shift = vec![0.0; d];
        for r in &replicates[1..] {
            for ((m, v), f) in shift.iter_mut().zip(r).zip(first) {
                *m += v - f;
            }
        }
        let mean: Vec<f64> = first.iter().zip(&shift).map(|(f, s)| f + s / k).collect();
        // Pairwise form of the population variance: sum_{i<j} (x_i - x_j)^2 / K^2.
        // It is exactly zero for identical replicates and exactly |a - b| / 2
        // for two.
        let mut var = vec![0.0; d];
        for (i, a) in replicates.iter().enumerate() {
            for b in &replicates[i + 1..] {
                for ((q, x), y) in var.iter_mut().zip(a).zip(b) {
                    *q += (x - y) * (x - y);
                }
            }
        }
        let std: Vec<f64> = var.into_iter().map(|q| (q / (k * k)).sqrt()).collect();
        let mean_uncertainty = std.iter().sum::<f64>() / d as f64;
        Ok(Self {
            replicates,
            mean,
            std,
            mean_uncertainty,
        })
    }

    pub fn k(&self) -> usize {
        self.replicates.len()
    }
}

/// Runs `sample(seed)` for seeds `base_seed + k`, `k = 0..replicates`.
/// Replicates run concurrently and are reduced in replicate order.
pub fn mc_ensemble<F>(sample: F, replicates: usize, base_seed: u64) -> Result<McEnsemble>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync,
{
    if replicates == 0 {
        return Err(Error::InvalidArgument(
            "ensemble needs at least one replicate".into(),
        ));
    }
    let results: Vec<Result<Vec<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|k| sample(base_seed.wrapping_add(k as u64)))
        .collect();
    let mut samples = Vec::with_capacity(replicates);
    for (k, r) in results.into_iter().enumerate() {
        samples.push(r.map_err(|e| Error::Replicate {
            replicate: k,
            source: Box::new(e),
        })?);
    }
    McEnsemble::from_replicates(samples)
}

/// Draws all replicates in one batched call `sample(noise, replicates)`,
/// where row `k` of `noise` is the stream of seed `base_seed + k`. The
/// returned flat buffer is split into `replicates` equal rows.
///
/// Samplers whose rows evolve independently (ancestral, Euler-Maruyama)
/// reproduce the per-seed replicates of [`mc_ensemble`] up to rounding.
/// Samplers with batch-level step control couple the rows, and a failure
/// cannot be attributed to a single replicate.
pub fn mc_ensemble_batched<F>(sample: F, replicates: usize, base_seed: u64) -> Result<McEnsemble>
where
    F: FnOnce(&RowStreams, usize) -> Result<Vec<f64>>,
{
    if replicates == 0 {
        return Err(Error::InvalidArgument(
            "ensemble needs at least one replicate".into(),
        ));
    }
    let flat = sample(&RowStreams::new(base_seed, replicates), replicates)?;
    if flat.is_empty() || flat.len() % replicates != 0 {
        return Err(Error::Shape {
            expected: replicates,
            got: flat.len(),
        });
    }
    McEnsemble::from_replicates(
        flat.chunks(flat.len() / replicates)
            .map(<[f64]>::to_vec)
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleMetrics {
    pub mean_sample: MetricReport,
    pub replicates: Vec<MetricReport>,
}

impl EnsembleMetrics {
    pub fn mean_replicate_psnr(&self) -> f64 {
        self.replicates.iter().map(|r| r.psnr_db).sum::<f64>() / self.replicates.len() as f64
    }

    pub fn mean_replicate_ssim(&self) -> f64 {
        self.replicates.iter().map(|r| r.ssim).sum::<f64>() / self.replicates.len() as f64
    }
}

/// SSIM and PSNR of the ensemble mean and of every replicate against `target`.
pub fn ensemble_metrics(
    e: &McEnsemble,
    target: &Image,
    data_range: f64,
) -> Result<EnsembleMetrics> {
    let as_image = |v: &[f64]| Image::new(target.width(), target.height(), v.to_vec());
    let mean_sample = evaluate(&as_image(&e.mean)?, target, data_range)?;
    let replicates = e
        .replicates
        .iter()
        .map(|r| evaluate(&as_image(r)?, target, data_range))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleMetrics {
        mean_sample,
        replicates,
    })
}
