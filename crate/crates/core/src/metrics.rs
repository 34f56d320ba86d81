//! Full-reference image quality: PSNR and Gaussian-window SSIM.

use crate::error::{check_len, Error, Result};

/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Row-major grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_len(width * height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn square(side: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(side, side, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn clamped(&self, lo: f64, hi: f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v.clamp(lo, hi)).collect(),
        }
    }

    fn check_same_shape(&self, other: &Image) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::InvalidArgument(format!(
                "image shapes differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub ssim: f64,
    pub psnr_db: f64,
    pub data_range: f64,
}

pub fn evaluate(a: &Image, b: &Image, data_range: f64) -> Result<MetricReport> {
    Ok(MetricReport {
        ssim: ssim(a, b, data_range)?,
        psnr_db: psnr(a, b, data_range)?,
        data_range,
    })
}

fn check_range(data_range: f64) -> Result<()> {
    if data_range > 0.0 && data_range.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "data range must be positive, got {data_range}"
        )))
    }
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty input".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Peak signal-to-noise ratio in dB, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &Image, b: &Image, data_range: f64) -> Result<f64> {
    a.check_same_shape(b)?;
    check_range(data_range)?;
    let m = mse(&a.data, &b.data)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (data_range * data_range / m).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> [f64; WINDOW] {
    let mut w = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    w
}

/// Half-sample symmetric reflection (`d c b a | a b c d`).
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Separable Gaussian filter with reflected borders.
fn blur(data: &[f64], width: usize, height: usize, w: &[f64; WINDOW]) -> Vec<f64> {
    let r = (WINDOW / 2) as isize;
    let mut rows = vec![0.0; data.len()];
    for y in 0..height {
        let row = &data[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                acc += wk * row[reflect(x as isize + k as isize - r, width)];
            }
            rows[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; data.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                acc += wk * rows[reflect(y as isize + k as isize - r, height) * width + x];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// Local SSIM from windowed first and second moments.
pub(crate) fn ssim_pixel(
    mu_a: f64,
    mu_b: f64,
    e_aa: f64,
    e_bb: f64,
    e_ab: f64,
    c1: f64,
    c2: f64,
) -> f64 {
    let var_a = e_aa - mu_a * mu_a;
    let var_b = e_bb - mu_b * mu_b;
    let cov = e_ab - mu_a * mu_b;
    let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
    let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
    num / den
}

/// Mean SSIM over all pixels with an 11x11 Gaussian window (sigma 1.5),
/// `C1 = (0.01 R)^2`, `C2 = (0.03 R)^2`.
pub fn ssim(a: &Image, b: &Image, data_range: f64) -> Result<f64> {
    a.check_same_shape(b)?;
    check_range(data_range)?;
    if a.width < WINDOW || a.height < WINDOW {
        return Err(Error::InvalidArgument(format!(
            "image {}x{} smaller than the {WINDOW}x{WINDOW} window",
            a.width, a.height
        )));
    }
    let w = gaussian_window();
    let (wd, ht) = (a.width, a.height);
    let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(x, y)| x * y).collect() };
    let mu_a = blur(&a.data, wd, ht, &w);
    let mu_b = blur(&b.data, wd, ht, &w);
    let e_aa = blur(&prod(&a.data, &a.data), wd, ht, &w);
    let e_bb = blur(&prod(&b.data, &b.data), wd, ht, &w);
    let e_ab = blur(&prod(&a.data, &b.data), wd, ht, &w);
    let c1 = (K1 * data_range).powi(2);
    let c2 = (K2 * data_range).powi(2);
    let total: f64 = (0..a.data.len())
        .map(|i| ssim_pixel(mu_a[i], mu_b[i], e_aa[i], e_bb[i], e_ab[i], c1, c2))
        .sum();
    Ok(total / a.data.len() as f64)
}

/// Direct 2-D sliding-window SSIM, used as a cross-check.
#[doc(hidden)]
pub fn ssim_reference(a: &Image, b: &Image, data_range: f64) -> Result<f64> {
    a.check_same_shape(b)?;
    let w = gaussian_window();
    let r = (WINDOW / 2) as isize;
    let c1 = (K1 * data_range).powi(2);
    let c2 = (K2 * data_range).powi(2);
    let mut total = 0.0;
    for y in 0..a.height {
        for x in 0..a.width {
            let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (dy, wy) in w.iter().enumerate() {
                let yy = reflect(y as isize + dy as isize - r, a.height);
                for (dx, wx) in w.iter().enumerate() {
                    let xx = reflect(x as isize + dx as isize - r, a.width);
                    let weight = wy * wx;
                    let (pa, pb) = (a.get(xx, yy), b.get(xx, yy));
                    ma += weight * pa;
                    mb += weight * pb;
                    aa += weight * pa * pa;
                    bb += weight * pb * pb;
                    ab += weight * pa * pb;
                }
            }
            total += ssim_pixel(ma, mb, aa, bb, ab, c1, c2);
        }
    }
    Ok(total / (a.width * a.height) as f64)
}
