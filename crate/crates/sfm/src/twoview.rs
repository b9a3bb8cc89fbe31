//! Essential-matrix estimation, pose recovery and two-view triangulation.

use nalgebra::{DMatrix, Matrix3, Matrix4, Vector2, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roomscan_core::{CameraIntrinsics, Error, Pose, Result};
use serde::{Deserialize, Serialize};

use crate::linalg::{null_vector, skew, vector_angle};

/// Smallest parallax accepted by [`triangulate`], in degrees.
pub const MIN_PARALLAX_DEG: f64 = 0.5;

/// A pixel in view A and the matching pixel in view B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub a: Vector2<f64>,
    pub b: Vector2<f64>,
}

impl Correspondence {
    pub fn new(a: Vector2<f64>, b: Vector2<f64>) -> Self {
        Self { a, b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacOptions {
    pub iters: usize,
    pub sampson_tol: f64,
    pub seed: u64,
}

impl Default for RansacOptions {
    fn default() -> Self {
        Self { iters: 2000, sampson_tol: 1e-5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EssentialEstimate {
    pub e: Matrix3<f64>,
    pub inliers: Vec<bool>,
}

impl EssentialEstimate {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

/// Sampson distance of a normalized correspondence under `e` (`b^T E a = 0`).
pub fn sampson_distance(e: &Matrix3<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let (x1, x2) = (a.push(1.0), b.push(1.0));
    let ex1 = e * x1;
    let etx2 = e.transpose() * x2;
    let num = x2.dot(&ex1);
    let den = ex1.x * ex1.x + ex1.y * ex1.y + etx2.x * etx2.x + etx2.y * etx2.y;
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    num * num / den
}

/// Nearest matrix with singular values `(σ, σ, 0)`.
pub fn project_to_essential(e: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = e.svd(true, true);
    let s = 0.5 * (svd.singular_values[0] + svd.singular_values[1]);
    svd.u.unwrap() * Matrix3::from_diagonal(&Vector3::new(s, s, 0.0)) * svd.v_t.unwrap()
}

/// Similarity taking points to zero centroid and mean distance √2.
fn hartley(points: &[Vector2<f64>]) -> Option<Matrix3<f64>> {
    let n = points.len() as f64;
    let c = points.iter().fold(Vector2::zeros(), |acc, p| acc + p) / n;
    let d = points.iter().map(|p| (p - c).norm()).sum::<f64>() / n;
    if !(d > 1e-12) {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / d;
    Some(Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0))
}

/// Eight-point (or more) least-squares estimate, projected to the manifold.
fn eight_point(a: &[Vector2<f64>], b: &[Vector2<f64>]) -> Option<Matrix3<f64>> {
    let ta = hartley(a)?;
    let tb = hartley(b)?;
    let mut m = DMatrix::zeros(a.len(), 9);
    for (i, (pa, pb)) in a.iter().zip(b).enumerate() {
        let x1 = ta * pa.push(1.0);
        let x2 = tb * pb.push(1.0);
        let row = [x2.x * x1.x, x2.x * x1.y, x2.x, x2.y * x1.x, x2.y * x1.y, x2.y, x1.x, x1.y, 1.0];
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    let (h, s) = null_vector(&m);
    // a second vanishing singular value means the sample does not pin E down
    if !(s[7] > 1e-10 * s[0]) {
        return None;
    }
    let en = Matrix3::from_row_slice(h.as_slice());
    let e = tb.transpose() * en * ta;
    let n = e.norm();
    if !(n > 0.0) || !n.is_finite() {
        return None;
    }
    Some(project_to_essential(&(e / n)))
}

/// RANSAC over Hartley-normalized eight-point samples.
pub fn estimate_essential(
    corrs: &[Correspondence],
    k: &CameraIntrinsics,
    opts: &RansacOptions,
) -> Result<EssentialEstimate> {
    if corrs.len() < 8 {
        return Err(Error::InsufficientData(format!("essential matrix needs 8 correspondences, got {}", corrs.len())));
    }
    if opts.iters == 0 || !(opts.sampson_tol > 0.0) {
        return Err(Error::InvalidArgument("RANSAC needs positive iterations and tolerance".into()));
    }
    let na: Vec<Vector2<f64>> = corrs.iter().map(|c| k.normalize(&c.a)).collect();
    let nb: Vec<Vector2<f64>> = corrs.iter().map(|c| k.normalize(&c.b)).collect();
    let n = corrs.len();
    let mask_for = |e: &Matrix3<f64>| -> Vec<bool> {
        na.iter().zip(&nb).map(|(a, b)| sampson_distance(e, a, b) < opts.sampson_tol).collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(Matrix3<f64>, usize)> = None;
    let mut needed = opts.iters;
    let mut it = 0;
    let (mut sa, mut sb) = (Vec::with_capacity(8), Vec::with_capacity(8));
    while it < needed.min(opts.iters) {
        it += 1;
        sa.clear();
        sb.clear();
        for i in sample(&mut rng, n, 8).into_iter() {
            sa.push(na[i]);
            sb.push(nb[i]);
        }
        let Some(e) = eight_point(&sa, &sb) else { continue };
        let count = mask_for(&e).iter().filter(|&&b| b).count();
        if best.as_ref().is_none_or(|(_, c)| count > *c) {
            best = Some((e, count));
            let w = count as f64 / n as f64;
            let fail = 1.0 - w.powi(8);
            if fail <= 0.0 {
                needed = it;
            } else if fail < 1.0 {
                needed = ((1.0f64 - 0.999).ln() / fail.ln()).ceil() as usize;
            }
        }
    }
    let Some((e_best, count)) = best else {
        return Err(Error::DegenerateGeometry("no non-degenerate eight-point sample".into()));
    };
    if count < 8 {
        return Err(Error::DegenerateGeometry(format!("best essential matrix has only {count} inliers")));
    }
    let mask = mask_for(&e_best);
    let (ia, ib): (Vec<_>, Vec<_>) = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| (na[i], nb[i])).unzip();
    if let Some(e) = eight_point(&ia, &ib) {
        let refined = mask_for(&e);
        if refined.iter().filter(|&&b| b).count() >= count {
            return Ok(EssentialEstimate { e, inliers: refined });
        }
    }
    Ok(EssentialEstimate { e: e_best, inliers: mask })
}

/// DLT triangulation in normalized coordinates. Returns the point and the
/// parallax angle in radians, without any acceptance checks.
pub fn triangulate_normalized(pa: &Pose, pb: &Pose, a: &Vector2<f64>, b: &Vector2<f64>) -> Option<Vector3<f64>> {
    let mut m = Matrix4::zeros();
    for (row, (pose, x)) in [(pa, a), (pb, b)].into_iter().enumerate() {
        let r = pose.rotation_matrix();
        let t = pose.translation;
        let p = |i: usize| nalgebra::RowVector4::new(r[(i, 0)], r[(i, 1)], r[(i, 2)], t[i]);
        m.set_row(2 * row, &(x.x * p(2) - p(0)));
        m.set_row(2 * row + 1, &(x.y * p(2) - p(1)));
    }
    // scale rows so the SVD is not dominated by one view
    for i in 0..4 {
        let n = m.row(i).norm();
        if n > 0.0 {
            m.set_row(i, &(m.row(i) / n));
        }
    }
    let svd = m.svd(false, true);
    let h = svd.v_t?.row(3).transpose();
    if h[3].abs() < 1e-14 * h.norm() {
        return None;
    }
    Some(Vector3::new(h[0], h[1], h[2]) / h[3])
}

/// Parallax angle at `x` between the rays from the two camera centers.
pub fn parallax(pa: &Pose, pb: &Pose, x: &Vector3<f64>) -> f64 {
    vector_angle(&(x - pa.center()), &(x - pb.center()))
}

/// Triangulates a pixel pair seen from two posed cameras.
pub fn triangulate(
    pa: &Pose,
    pb: &Pose,
    k: &CameraIntrinsics,
    ua: &Vector2<f64>,
    ub: &Vector2<f64>,
) -> Result<Vector3<f64>> {
    triangulate_checked(pa, pb, &k.normalize(ua), &k.normalize(ub), MIN_PARALLAX_DEG.to_radians())
}

pub(crate) fn triangulate_checked(
    pa: &Pose,
    pb: &Pose,
    a: &Vector2<f64>,
    b: &Vector2<f64>,
    min_parallax: f64,
) -> Result<Vector3<f64>> {
    if (pa.center() - pb.center()).norm() <= 1e-12 {
        return Err(Error::LowParallax);
    }
    let x = triangulate_normalized(pa, pb, a, b).ok_or(Error::LowParallax)?;
    if !(parallax(pa, pb, &x) >= min_parallax) {
        return Err(Error::LowParallax);
    }
    if pa.transform(&x).z <= 0.0 || pb.transform(&x).z <= 0.0 {
        return Err(Error::NegativeDepth);
    }
    Ok(x)
}

/// The four `(R, t)` factorizations of an essential matrix.
pub fn decompose_essential(e: &Matrix3<f64>) -> [(Matrix3<f64>, Vector3<f64>); 4] {
    let svd = e.svd(true, true);
    let mut u = svd.u.unwrap();
    let mut v_t = svd.v_t.unwrap();
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v_t.determinant() < 0.0 {
        v_t = -v_t;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = u * w * v_t;
    let r2 = u * w.transpose() * v_t;
    let t: Vector3<f64> = u.column(2).into();
    [(r1, t), (r1, -t), (r2, t), (r2, -t)]
}

/// Number of correspondences triangulating in front of both cameras with
/// sufficient parallax, for B at `(r, t)` relative to A at the identity.
pub fn count_valid(r: &Matrix3<f64>, t: &Vector3<f64>, na: &[Vector2<f64>], nb: &[Vector2<f64>]) -> usize {
    let pa = Pose::identity();
    let pb = Pose::from_matrix(r, *t);
    let min = MIN_PARALLAX_DEG.to_radians();
    na.iter().zip(nb).filter(|(a, b)| triangulate_checked(&pa, &pb, a, b, min).is_ok()).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelativePose {
    pub rotation: Matrix3<f64>,
    /// Unit-norm translation of B relative to A.
    pub translation: Vector3<f64>,
    pub valid_points: usize,
}

/// Cheirality disambiguation among the four decompositions of `e`.
pub fn recover_pose(e: &Matrix3<f64>, corrs: &[Correspondence], k: &CameraIntrinsics) -> Result<RelativePose> {
    let na: Vec<Vector2<f64>> = corrs.iter().map(|c| k.normalize(&c.a)).collect();
    let nb: Vec<Vector2<f64>> = corrs.iter().map(|c| k.normalize(&c.b)).collect();
    let mut best: Option<RelativePose> = None;
    for (r, t) in decompose_essential(e) {
        let n = count_valid(&r, &t, &na, &nb);
        if best.as_ref().is_none_or(|b| n > b.valid_points) {
            best = Some(RelativePose { rotation: r, translation: t.normalize(), valid_points: n });
        }
    }
    match best {
        Some(b) if b.valid_points > 0 => Ok(b),
        _ => Err(Error::DegenerateGeometry("no pose decomposition places points in front of both cameras".into())),
    }
}

/// `[t]x R`, the essential matrix of B relative to A.
pub fn essential_from_pose(r: &Matrix3<f64>, t: &Vector3<f64>) -> Matrix3<f64> {
    skew(t) * r
}
