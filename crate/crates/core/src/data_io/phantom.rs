//! Paired MR-like / CT-like ellipse phantoms on a shared geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DatasetKind, Pair, PairedDataset};
use crate::error::{Error, Result};
use crate::metrics::Image;

pub const DEFAULT_SIDE: usize = 32;
pub const MIN_SIDE: usize = 16;
pub const TEXTURE_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tissue {
    Background,
    Soft,
    Fluid,
    Bone,
}

impl Tissue {
    pub fn ct(self) -> f64 {
        match self {
            Tissue::Background => 0.0,
            Tissue::Soft => 0.35,
            Tissue::Fluid => 0.30,
            Tissue::Bone => 0.95,
        }
    }

    /// Soft tissue and bone swap contrast relative to CT.
    pub fn mr(self) -> f64 {
        match self {
            Tissue::Background => 0.0,
            Tissue::Soft => 0.70,
            Tissue::Fluid => 0.90,
            Tissue::Bone => 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    /// Rotation in radians.
    pub angle: f64,
    pub tissue: Tissue,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        let (s, c) = self.angle.sin_cos();
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_x).powi(2) + (v / self.semi_y).powi(2) <= 1.0
    }

    fn inside_canvas(&self, side: f64) -> bool {
        let r = self.semi_x.max(self.semi_y);
        self.cx - r >= 0.0 && self.cy - r >= 0.0 && self.cx + r <= side && self.cy + r <= side
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub side: usize,
    /// Painted in order; later ellipses overwrite earlier ones.
    pub ellipses: Vec<Ellipse>,
}

impl Phantom {
    /// A body ellipse of soft tissue with 2 to 5 bone/fluid inclusions.
    pub fn random(rng: &mut ChaCha8Rng, side: usize) -> Self {
        let s = side as f64;
        let mut ellipses = vec![Ellipse {
            cx: s * (0.5 + rng.gen_range(-0.05..0.05)),
            cy: s * (0.5 + rng.gen_range(-0.05..0.05)),
            semi_x: s * rng.gen_range(0.34..0.42),
            semi_y: s * rng.gen_range(0.26..0.38),
            angle: rng.gen_range(-0.3..0.3),
            tissue: Tissue::Soft,
        }];
        let inner = rng.gen_range(2..=5);
        for i in 0..inner {
            let tissue = if i == 0 || rng.gen_bool(0.5) {
                Tissue::Bone
            } else {
                Tissue::Fluid
            };
            ellipses.push(Ellipse {
                cx: s * (0.5 + rng.gen_range(-0.22..0.22)),
                cy: s * (0.5 + rng.gen_range(-0.18..0.18)),
                semi_x: s * rng.gen_range(0.06..0.16),
                semi_y: s * rng.gen_range(0.06..0.16),
                angle: rng.gen_range(0.0..std::f64::consts::PI),
                tissue,
            });
        }
        Self { side, ellipses }
    }

    pub fn labels(&self) -> Vec<Tissue> {
        let n = self.side;
        let mut out = vec![Tissue::Background; n * n];
        for y in 0..n {
            for x in 0..n {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                for e in &self.ellipses {
                    if e.contains(px, py) {
                        out[y * n + x] = e.tissue;
                    }
                }
            }
        }
        out
    }

    pub fn inside_canvas(&self) -> bool {
        self.ellipses
            .iter()
            .all(|e| e.inside_canvas(self.side as f64))
    }
}

fn render(labels: &[Tissue], side: usize, table: fn(Tissue) -> f64) -> Image {
    Image::square(side, labels.iter().map(|t| table(*t)).collect())
        .expect("label map is side x side")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomPair {
    pub phantom: Phantom,
    pub labels: Vec<Tissue>,
    pub mr: Image,
    pub ct: Image,
}

impl PhantomPair {
    pub fn clean_mr(&self) -> Image {
        render(&self.labels, self.phantom.side, Tissue::mr)
    }

    pub fn clean_ct(&self) -> Image {
        render(&self.labels, self.phantom.side, Tissue::ct)
    }
}

fn pair_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn make_pair(rng: &mut ChaCha8Rng, side: usize) -> PhantomPair {
    let phantom = Phantom::random(rng, side);
    let labels = phantom.labels();
    let mut textured = |table: fn(Tissue) -> f64| {
        let mut img = render(&labels, side, table);
        for v in img.data_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = (*v + TEXTURE_STD * z).clamp(0.0, 1.0);
        }
        img
    };
    let mr = textured(Tissue::mr);
    let ct = textured(Tissue::ct);
    PhantomPair {
        phantom,
        labels,
        mr,
        ct,
    }
}

fn check_side(side: usize) -> Result<()> {
    if side < MIN_SIDE {
        return Err(Error::InvalidArgument(format!(
            "phantom side must be at least {MIN_SIDE}, got {side}"
        )));
    }
    Ok(())
}

/// One pixel-aligned (MR-like, CT-like) pair.
pub fn gen_phantom_pair(seed: u64, side: usize) -> Result<PhantomPair> {
    check_side(side)?;
    Ok(make_pair(&mut pair_rng(seed, 0), side))
}

/// `n` pairs; pair `k` is drawn from stream `k` of `seed`, so pair 0 equals
/// `gen_phantom_pair(seed, side)`. Targets are CT-like, conditions MR-like.
pub fn gen_phantom_dataset(n: usize, side: usize, seed: u64) -> Result<PairedDataset> {
    check_side(side)?;
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one pair".into()));
    }
    let pairs = (0..n as u64)
        .map(|k| {
            let p = make_pair(&mut pair_rng(seed, k), side);
            Pair {
                target: p.ct.into_data(),
                cond: p.mr.into_data(),
            }
        })
        .collect();
    Ok(PairedDataset {
        kind: DatasetKind::Phantom,
        side: Some(side),
        seed: Some(seed),
        pairs,
    })
}
