//! Harris corners with normalized patch descriptors, and ratio-test matching.

use rayon::prelude::*;
use roomscan_core::{Error, GrayImage, Result};
use serde::{Deserialize, Serialize};

pub const HARRIS_K: f64 = 0.04;
/// Half side of the square descriptor patch.
pub const PATCH_HALF: usize = 5;
pub const DESCRIPTOR_LEN: usize = (2 * PATCH_HALF + 1) * (2 * PATCH_HALF + 1);
/// Responses below this fraction of the image maximum are ignored.
const RELATIVE_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub x: f64,
    pub y: f64,
    pub response: f64,
    pub descriptor: Vec<f32>,
}

/// Harris response `det(M) - k tr(M)^2` of the Gaussian-weighted structure
/// tensor. Pixels within two of the border are zero.
pub fn harris_response(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let p = img.to_f64();
    let mut ixx = vec![0.0; w * h];
    let mut iyy = vec![0.0; w * h];
    let mut ixy = vec![0.0; w * h];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w - 1 {
            let at = |dx: isize, dy: isize| p[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
            let gx = at(1, -1) + 2.0 * at(1, 0) + at(1, 1) - at(-1, -1) - 2.0 * at(-1, 0) - at(-1, 1);
            let gy = at(-1, 1) + 2.0 * at(0, 1) + at(1, 1) - at(-1, -1) - 2.0 * at(0, -1) - at(1, -1);
            let i = y * w + x;
            ixx[i] = gx * gx;
            iyy[i] = gy * gy;
            ixy[i] = gx * gy;
        }
    }
    const G: [f64; 3] = [1.0, 2.0, 1.0];
    let mut r = vec![0.0; w * h];
    for y in 2..h.saturating_sub(2) {
        for x in 2..w - 2 {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for (j, gy) in G.iter().enumerate() {
                for (i, gx) in G.iter().enumerate() {
                    let idx = (y + j - 1) * w + x + i - 1;
                    let g = gx * gy / 16.0;
                    a += g * ixx[idx];
                    b += g * iyy[idx];
                    c += g * ixy[idx];
                }
            }
            r[y * w + x] = a * b - c * c - HARRIS_K * (a + b) * (a + b);
        }
    }
    r
}

fn bilinear(p: &[f64], w: usize, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as usize, y0 as usize);
    let v = |xx: usize, yy: usize| p[yy * w + xx];
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    (1.0 - fy) * ((1.0 - fx) * v(x0, y0) + fx * v(x1, y0)) + fy * ((1.0 - fx) * v(x0, y1) + fx * v(x1, y1))
}

/// Zero-mean, unit-norm patch sampled around `(x, y)`; `None` when the patch
/// leaves the image or is flat.
fn describe(p: &[f64], w: usize, h: usize, x: f64, y: f64) -> Option<Vec<f32>> {
    let r = PATCH_HALF as f64;
    if x - r < 0.0 || y - r < 0.0 || x + r > (w - 1) as f64 || y + r > (h - 1) as f64 {
        return None;
    }
    let mut d = Vec::with_capacity(DESCRIPTOR_LEN);
    for j in -(PATCH_HALF as isize)..=PATCH_HALF as isize {
        for i in -(PATCH_HALF as isize)..=PATCH_HALF as isize {
            d.push(bilinear(p, w, x + i as f64, y + j as f64));
        }
    }
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    d.iter_mut().for_each(|v| *v -= mean);
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-9 {
        return None;
    }
    Some(d.iter().map(|v| (v / norm) as f32).collect())
}

/// Vertex offset of the parabola through `(-1, a), (0, b), (1, c)`.
fn parabola_peak(a: f64, b: f64, c: f64) -> f64 {
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        return 0.0;
    }
    (0.5 * (a - c) / den).clamp(-0.5, 0.5)
}

/// Detects up to `max_n` Harris corners, strongest first.
pub fn detect_features(img: &GrayImage, max_n: usize) -> Result<Vec<Feature>> {
    if img.width() < 16 || img.height() < 16 {
        return Err(Error::InvalidArgument(format!(
            "feature detection needs at least 16x16 pixels, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let r = harris_response(img);
    let peak = r.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 || max_n == 0 {
        return Ok(Vec::new());
    }
    let floor = peak * RELATIVE_THRESHOLD;

    // 3x3 suppression; plateaus keep their first pixel in raster order
    let mut cands = Vec::new();
    for y in 3..h - 3 {
        for x in 3..w - 3 {
            let v = r[y * w + x];
            if v <= floor {
                continue;
            }
            let mut is_max = true;
            'n: for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let n = r[(y as isize + dy) as usize * w + (x as isize + dx) as usize];
                    let earlier = dy < 0 || (dy == 0 && dx < 0);
                    if n > v || (earlier && n == v) {
                        is_max = false;
                        break 'n;
                    }
                }
            }
            if is_max {
                cands.push((x, y, v));
            }
        }
    }
    cands.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));

    let p = img.to_f64();
    let mut out = Vec::with_capacity(max_n.min(cands.len()));
    for (x, y, v) in cands {
        if out.len() == max_n {
            break;
        }
        let at = |xx: usize, yy: usize| r[yy * w + xx];
        let fx = x as f64 + parabola_peak(at(x - 1, y), v, at(x + 1, y));
        let fy = y as f64 + parabola_peak(at(x, y - 1), v, at(x, y + 1));
        if let Some(descriptor) = describe(&p, w, h, fx, fy) {
            out.push(Feature { x: fx, y: fy, response: v, descriptor });
        }
    }
    Ok(out)
}

fn sq_dist(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best and second-best neighbor of `q` in `set` as `(index, d², second d²)`.
fn nearest_two(q: &[f32], set: &[Feature]) -> Option<(usize, f32, Option<f32>)> {
    let mut best: Option<(usize, f32)> = None;
    let mut second: Option<f32> = None;
    for (i, f) in set.iter().enumerate() {
        let d = sq_dist(q, &f.descriptor);
        match best {
            Some((_, bd)) if d >= bd => {
                if second.is_none_or(|s| d < s) {
                    second = Some(d);
                }
            }
            _ => {
                second = best.map(|(_, bd)| bd);
                best = Some((i, d));
            }
        }
    }
    best.map(|(i, d)| (i, d, second))
}

/// Mutual nearest neighbors that pass the distance ratio test on the `a` side.
pub fn match_features(a: &[Feature], b: &[Feature], ratio: f64) -> Vec<(usize, usize)> {
    let a_to_b: Vec<Option<(usize, f32, Option<f32>)>> = a.par_iter().map(|f| nearest_two(&f.descriptor, b)).collect();
    let b_to_a: Vec<Option<usize>> = b.par_iter().map(|f| nearest_two(&f.descriptor, a).map(|n| n.0)).collect();
    let mut out = Vec::new();
    for (ia, hit) in a_to_b.iter().enumerate() {
        let Some((ib, d, second)) = *hit else { continue };
        if b_to_a[ib] != Some(ia) {
            continue;
        }
        if let Some(s) = second {
            if (d as f64).sqrt() >= ratio * (s as f64).sqrt() {
                continue;
            }
        }
        out.push((ia, ib));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feat(d: &[f32]) -> Feature {
        Feature { x: 0.0, y: 0.0, response: 1.0, descriptor: d.to_vec() }
    }

    #[test]
    fn constant_image_has_no_features() {
        let img = GrayImage::filled(32, 32, 100).unwrap();
        assert!(detect_features(&img, 50).unwrap().is_empty());
    }

    #[test]
    fn small_image_is_rejected() {
        let img = GrayImage::filled(15, 32, 100).unwrap();
        assert_eq!(detect_features(&img, 5).unwrap_err().kind(), "invalid-argument");
    }

    #[test]
    fn ratio_test_rejects_ambiguous() {
        // distances 0.10 and 0.11 from the query
        let a = vec![feat(&[0.0, 0.0])];
        let b = vec![feat(&[0.10, 0.0]), feat(&[0.0, 0.11])];
        assert!(match_features(&a, &b, 0.8).is_empty());
        assert_eq!(match_features(&a, &b[..1], 0.8), vec![(0, 0)]);
    }

    #[test]
    fn identical_lists_match_identically() {
        let a: Vec<Feature> = (0..6).map(|i| feat(&[i as f32, (i * i) as f32])).collect();
        assert_eq!(match_features(&a, &a, 0.8), (0..6).map(|i| (i, i)).collect::<Vec<_>>());
    }

    #[test]
    fn descriptors_are_normalized() {
        let img = GrayImage::from_fn(64, 64, |x, y| if (x / 8 + y / 8) % 2 == 0 { 200 } else { 40 }).unwrap();
        let f = detect_features(&img, 100).unwrap();
        assert!(!f.is_empty());
        for x in &f {
            let n: f64 = x.descriptor.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
            let m: f64 = x.descriptor.iter().map(|v| *v as f64).sum();
            assert!(m.abs() < 1e-5);
        }
    }
}
