//! Directional pseudo-Wigner / Rényi-entropy anisotropy score.
//!
//! For each orientation, 1-D pixel sequences centered on a grid of anchor
//! pixels are transformed with a windowed pseudo-Wigner distribution. Each
//! anchor's squared spectrum is normalized to a probability vector and
//! summarized by its Rényi entropy; averaging over anchors gives one
//! expected entropy per orientation. The score is the population standard
//! deviation of those entropies: sharp, directional content spreads them
//! apart, blur pulls them together.
//!
//! Luminance is used as is. The DC term then dominates flat and blurred
//! windows, every direction's entropy falls toward zero, and a global
//! exposure gain cancels in the per-anchor normalization.

use std::f64::consts::PI;

use roomscan_core::{Error, GrayImage, Result};

use crate::config::ReduceConfig;
use crate::entropy::renyi_unchecked;

/// Anchor pixels whose windows fit inside the image along every orientation.
fn anchor_range(len: u32, half: usize, stride: usize) -> impl Iterator<Item = usize> {
    let len = len as usize;
    (half..len - half).step_by(stride)
}

/// Nearest-neighbor pixel offsets `m * (cos θ, sin θ)` for `m = -half..=half`.
fn line_offsets(theta: f64, half: usize) -> Vec<(isize, isize)> {
    let (s, c) = theta.sin_cos();
    (-(half as isize)..=half as isize)
        .map(|m| ((m as f64 * c).round() as isize, (m as f64 * s).round() as isize))
        .collect()
}

struct Spectrum {
    /// `cos(2π · 2mq / N)` for `m = 0..=half`, `q = 0..N`, row-major by `q`.
    cos_table: Vec<f64>,
    half: usize,
    len: usize,
}

impl Spectrum {
    fn new(half: usize) -> Self {
        let len = 2 * half + 1;
        let mut cos_table = Vec::with_capacity(len * (half + 1));
        for q in 0..len {
            for m in 0..=half {
                let phase = 2.0 * PI * ((2 * m * q) % len) as f64 / len as f64;
                cos_table.push(phase.cos());
            }
        }
        Self { cos_table, half, len }
    }

    /// Pseudo-Wigner distribution at the window center of the raw luminance
    /// sequence `z` (length `2 * half + 1`). The kernel `z[m] z[-m]` is even
    /// in `m`, so the transform is real.
    fn pwd(&self, z: &[f64], out: &mut [f64]) {
        let h = self.half;
        let mut kernel = vec![0.0; h + 1];
        for (m, k) in kernel.iter_mut().enumerate() {
            *k = z[h + m] * z[h - m];
        }
        for (q, w) in out.iter_mut().enumerate().take(self.len) {
            let row = &self.cos_table[q * (h + 1)..(q + 1) * (h + 1)];
            let mut acc = kernel[0];
            for m in 1..=h {
                acc += 2.0 * kernel[m] * row[m];
            }
            *w = acc;
        }
    }
}

/// Expected Rényi entropy, in bits, of each of the `directions_n` orientations.
pub fn directional_entropies(img: &GrayImage, cfg: &ReduceConfig) -> Result<Vec<f64>> {
    let half = cfg.pwd_window;
    let need = 2 * half + 1;
    if (img.width() as usize) < need || (img.height() as usize) < need {
        return Err(Error::InvalidArgument(format!(
            "image {}x{} is smaller than the {need}-pixel analysis window",
            img.width(),
            img.height()
        )));
    }
    if cfg.directions_n == 0 || cfg.anchor_stride == 0 {
        return Err(Error::InvalidArgument("directions_n and anchor_stride must be positive".into()));
    }
    let spectrum = Spectrum::new(half);
    let pixels = img.pixels();
    let width = img.width() as usize;
    let mut z = vec![0.0; need];
    let mut w = vec![0.0; need];
    let mut p = vec![0.0; need];

    let mut out = Vec::with_capacity(cfg.directions_n);
    for k in 0..cfg.directions_n {
        let theta = k as f64 * PI / cfg.directions_n as f64;
        let offsets = line_offsets(theta, half);
        let mut total = 0.0;
        let mut count = 0usize;
        for ay in anchor_range(img.height(), half, cfg.anchor_stride) {
            for ax in anchor_range(img.width(), half, cfg.anchor_stride) {
                for (zi, &(dx, dy)) in z.iter_mut().zip(&offsets) {
                    let x = (ax as isize + dx) as usize;
                    let y = (ay as isize + dy) as usize;
                    *zi = pixels[y * width + x] as f64;
                }
                spectrum.pwd(&z, &mut w);
                let energy: f64 = w.iter().map(|v| v * v).sum();
                let entropy = if energy > 0.0 {
                    for (pi, wi) in p.iter_mut().zip(&w) {
                        *pi = wi * wi / energy;
                    }
                    renyi_unchecked(&p, cfg.renyi_alpha)
                } else {
                    0.0
                };
                total += entropy;
                count += 1;
            }
        }
        out.push(total / count as f64);
    }
    Ok(out)
}

/// Population standard deviation; exactly zero when all values are equal.
pub(crate) fn population_std(values: &[f64]) -> f64 {
    if values.windows(2).all(|w| w[0] == w[1]) {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// No-reference anisotropy quality score (nonnegative, higher is sharper).
pub fn anisotropy(img: &GrayImage, cfg: &ReduceConfig) -> Result<f64> {
    Ok(population_std(&directional_entropies(img, cfg)?))
}
