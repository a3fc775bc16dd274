//! Masked PSNR and SSIM.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Value written in place of `+inf` dB in text output.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_pair(a: &Image, b: &Image, mask: &[bool]) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::shape(format!(
            "images differ in shape: {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    if mask.len() != a.width() * a.height() {
        return Err(Error::shape("mask length does not match image size"));
    }
    Ok(())
}

/// Mean squared error over masked pixels and all channels.
pub fn mse(a: &Image, b: &Image, mask: &[bool]) -> Result<f64> {
    check_pair(a, b, mask)?;
    let c = a.channels();
    let (sum, n) = a
        .data()
        .chunks_exact(c)
        .zip(b.data().chunks_exact(c))
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0f64, 0usize), |(s, n), ((pa, pb), _)| {
            let e: f64 = pa.iter().zip(pb).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum();
            (s + e, n + 1)
        });
    if n == 0 {
        return Err(Error::precondition("mask selects no pixels"));
    }
    Ok(sum / (n * c) as f64)
}

/// `10 log10(1 / MSE)` with peak 1. Identical images give `+inf`.
pub fn psnr(a: &Image, b: &Image, mask: &[bool]) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b, mask)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

/// Finite stand-in for text and JSON output.
pub fn capped_db(db: f64) -> f64 {
    db.min(PSNR_CAP_DB)
}

/// Normalized 11x11 Gaussian, stored as its 1-D factor.
pub fn gaussian_kernel_1d() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Single-scale SSIM averaged over channels and over every window centre that
/// lies in `mask` and keeps the whole window inside the image.
pub fn ssim(a: &Image, b: &Image, mask: &[bool]) -> Result<f64> {
    check_pair(a, b, mask)?;
    let (w, h, c) = (a.width(), a.height(), a.channels());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::precondition(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let k = gaussian_kernel_1d();
    let r = SSIM_WINDOW / 2;
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let (ow, oh) = (w - 2 * r, h - 2 * r);

    let mut total = 0.0f64;
    let mut centres = 0usize;
    for ch in 0..c {
        let plane = |img: &Image| -> Vec<f64> { img.data().iter().skip(ch).step_by(c).map(|&v| v as f64).collect() };
        let xa = plane(a);
        let xb = plane(b);
        let xaa: Vec<f64> = xa.iter().map(|v| v * v).collect();
        let xbb: Vec<f64> = xb.iter().map(|v| v * v).collect();
        let xab: Vec<f64> = xa.iter().zip(&xb).map(|(p, q)| p * q).collect();
        let [ma, mb, saa, sbb, sab] = [&xa, &xb, &xaa, &xbb, &xab].map(|p| filter_valid(p, w, h, &k));

        let rows: Vec<(f64, usize)> = (0..oh)
            .into_par_iter()
            .map(|y| {
                let mut s = 0.0;
                let mut n = 0;
                for x in 0..ow {
                    if !mask[(y + r) * w + x + r] {
                        continue;
                    }
                    let i = y * ow + x;
                    let (mu_a, mu_b) = (ma[i], mb[i]);
                    let va = saa[i] - mu_a * mu_a;
                    let vb = sbb[i] - mu_b * mu_b;
                    let cov = sab[i] - mu_a * mu_b;
                    s += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                        / ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
                    n += 1;
                }
                (s, n)
            })
            .collect();
        for (s, n) in rows {
            total += s;
            centres += n;
        }
    }
    if centres == 0 {
        return Err(Error::precondition("mask selects no full SSIM window centre"));
    }
    Ok(total / centres as f64)
}

/// Separable "valid" correlation with the 1-D kernel in both directions.
fn filter_valid(p: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..SSIM_WINDOW).map(|j| k[j] * p[y * w + x + j]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|j| k[j] * tmp[(y + j) * ow + x]).sum();
        }
    }
    out
}

/// Scores for one evaluated view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// dB, capped for serialization.
    pub psnr: f64,
    pub ssim: f64,
    pub pixels: usize,
    /// Fraction of the image covered by the mask.
    pub coverage: f64,
}

pub fn evaluate(a: &Image, b: &Image, mask: &[bool]) -> Result<QualityReport> {
    let p = psnr(a, b, mask)?;
    let s = ssim(a, b, mask)?;
    let pixels = mask.iter().filter(|&&m| m).count();
    Ok(QualityReport {
        psnr: capped_db(p),
        ssim: s,
        pixels,
        coverage: pixels as f64 / mask.len() as f64,
    })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt() })
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p = f.precision().unwrap_or(2);
        write!(f, "{:.p$} ± {:.p$}", self.mean, self.std)
    }
}
