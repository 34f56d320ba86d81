//! Synthetic paired datasets and the on-disk formats.

mod formats;
mod phantom;

pub use formats::{
    load_dataset, parse_csv_points, parse_pgm, read_csv_points, read_pgm, read_phantom_dir,
    render_csv_points, render_pgm, write_csv_points, write_pgm, write_phantom_dir, PGM_MAXVAL,
};
pub use phantom::{
    gen_phantom_dataset, gen_phantom_pair, Ellipse, Phantom, PhantomPair, Tissue, DEFAULT_SIDE,
    MIN_SIDE, TEXTURE_STD,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Gmm2d,
    Phantom,
}

/// One training example: the target `x0` and its condition `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub target: Vec<f64>,
    pub cond: Vec<f64>,
}

impl Pair {
    /// The condition, or `None` for an unconditional pair.
    pub fn cond_opt(&self) -> Option<&[f64]> {
        if self.cond.is_empty() {
            None
        } else {
            Some(&self.cond)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    pub kind: DatasetKind,
    /// Image side length for phantom data.
    pub side: Option<usize>,
    pub seed: Option<u64>,
    pub pairs: Vec<Pair>,
}

impl PairedDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn target_dim(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.target.len())
    }

    pub fn cond_dim(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.cond.len())
    }

    /// Checks alignment of dimensions and that every value is finite and in [0, 1].
    pub fn validate(&self) -> Result<()> {
        let (dt, dc) = (self.target_dim(), self.cond_dim());
        for (i, p) in self.pairs.iter().enumerate() {
            if p.target.len() != dt || p.cond.len() != dc {
                return Err(Error::InvalidArgument(format!(
                    "pair {i} has inconsistent dimensions"
                )));
            }
            if p.target
                .iter()
                .chain(&p.cond)
                .any(|v| !(0.0..=1.0).contains(v))
            {
                return Err(Error::InvalidArgument(format!(
                    "pair {i} has values outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Class means of the 2-D mixture before mapping to the unit square.
pub const GMM2D_MEANS: [[f64; 2]; 2] = [[-1.0, -1.0], [1.0, 1.0]];
pub const GMM2D_STD: f64 = 0.25;
/// Affine map `u = (x + OFFSET) / SCALE` onto the unit square.
pub const GMM2D_OFFSET: f64 = 2.5;
pub const GMM2D_SCALE: f64 = 5.0;

pub fn gmm2d_to_unit(x: f64) -> f64 {
    ((x + GMM2D_OFFSET) / GMM2D_SCALE).clamp(0.0, 1.0)
}

pub fn gmm2d_from_unit(u: f64) -> f64 {
    u * GMM2D_SCALE - GMM2D_OFFSET
}

/// Class means in unit-square coordinates.
pub fn gmm2d_unit_means() -> [[f64; 2]; 2] {
    GMM2D_MEANS.map(|m| m.map(gmm2d_to_unit))
}

pub fn one_hot(label: usize, classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; classes];
    v[label] = 1.0;
    v
}

/// Two-class conditional mixture: `y` one-hot, `x0 ~ N(mu_y, 0.25^2 I)`
/// mapped to `[0, 1]^2`.
pub fn gen_conditional_gmm2d(n: usize, seed: u64) -> Result<PairedDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..n)
        .map(|_| {
            let label = usize::from(rng.gen_bool(0.5));
            let target = GMM2D_MEANS[label]
                .iter()
                .map(|m| {
                    let z: f64 = rng.sample(StandardNormal);
                    gmm2d_to_unit(m + GMM2D_STD * z)
                })
                .collect();
            Pair {
                target,
                cond: one_hot(label, 2),
            }
        })
        .collect();
    Ok(PairedDataset {
        kind: DatasetKind::Gmm2d,
        side: None,
        seed: Some(seed),
        pairs,
    })
}

/// Min-max normalization to [0, 1]; a constant image maps to zeros.
pub fn normalize_intensity(img: &[f64]) -> Result<Vec<f64>> {
    if img.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "image contains non-finite values".into(),
        ));
    }
    let lo = img.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = img.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if img.is_empty() || hi == lo {
        return Ok(vec![0.0; img.len()]);
    }
    let span = hi - lo;
    Ok(img
        .iter()
        .map(|v| ((v - lo) / span).clamp(0.0, 1.0))
        .collect())
}
