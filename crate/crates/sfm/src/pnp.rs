use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, SymmetricEigen, Vector2, Vector3};
use roomscan_core::{CameraIntrinsics, Error, Pose, Result};

use crate::ba::refine_pose;
use crate::linalg::{nearest_rotation, null_vector};

/// Smallest-to-largest eigenvalue ratio of the point scatter below which
/// the points count as coplanar or collinear.
pub const PNP_CONDITION_MIN: f64 = 1e-4;

/// Ratio of the two smallest to the largest principal variances of `points`.
pub fn spread_ratio(points: &[Vector3<f64>]) -> f64 {
    let n = points.len() as f64;
    let c = points.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let cov = points.iter().fold(Matrix3::zeros(), |a, p| a + (p - c) * (p - c).transpose()) / n;
    let ev = SymmetricEigen::new(cov).eigenvalues;
    let max = ev.max();
    if !(max > 0.0) {
        return 0.0;
    }
    ev.min().max(0.0) / max
}

/// Direct linear transform for the normalized projection matrix, then the
/// nearest rigid pose.
fn dlt(points: &[Vector3<f64>], norm_px: &[Vector2<f64>]) -> Result<Pose> {
    let n = points.len();
    let c = points.iter().fold(Vector3::zeros(), |a, p| a + p) / n as f64;
    let d = points.iter().map(|p| (p - c).norm()).sum::<f64>() / n as f64;
    let s = 3f64.sqrt() / d;
    let mut t3 = Matrix4::identity() * s;
    t3[(3, 3)] = 1.0;
    t3.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-s * c));

    let mut m = DMatrix::zeros(2 * n, 12);
    for (i, (x, u)) in points.iter().zip(norm_px).enumerate() {
        let xn = (x - c) * s;
        let xh = [xn.x, xn.y, xn.z, 1.0];
        for j in 0..4 {
            m[(2 * i, j)] = xh[j];
            m[(2 * i, 8 + j)] = -u.x * xh[j];
            m[(2 * i + 1, 4 + j)] = xh[j];
            m[(2 * i + 1, 8 + j)] = -u.y * xh[j];
        }
    }
    let (h, sv) = null_vector(&m);
    if !(sv[10] > 1e-9 * sv[0]) {
        return Err(Error::DegenerateGeometry("PnP system is rank deficient".into()));
    }
    let pn = Matrix3x4::from_row_slice(h.as_slice());
    let mut p = pn * t3;
    let depth_sign: f64 = points.iter().map(|x| (p.row(2) * x.push(1.0))[0].signum()).sum();
    if depth_sign < 0.0 {
        p = -p;
    }
    let m3: Matrix3<f64> = p.fixed_view::<3, 3>(0, 0).into();
    let svd = m3.svd(false, false);
    let scale = svd.singular_values.mean();
    if !(scale > 0.0) {
        return Err(Error::DegenerateGeometry("PnP projection matrix vanished".into()));
    }
    let r = nearest_rotation(&(m3 / scale));
    let t: Vector3<f64> = p.column(3) / scale;
    Ok(Pose::from_matrix(&r, t))
}

/// Camera pose from ≥ 6 non-coplanar 3D–2D correspondences.
pub fn pnp(points: &[Vector3<f64>], pixels: &[Vector2<f64>], k: &CameraIntrinsics) -> Result<Pose> {
    if points.len() != pixels.len() {
        return Err(Error::InvalidArgument("points and pixels differ in length".into()));
    }
    if points.len() < 6 {
        return Err(Error::InsufficientData(format!("PnP needs 6 correspondences, got {}", points.len())));
    }
    if spread_ratio(points) < PNP_CONDITION_MIN {
        return Err(Error::DegenerateGeometry("PnP points are collinear or coplanar".into()));
    }
    let norm: Vec<Vector2<f64>> = pixels.iter().map(|u| k.normalize(u)).collect();
    let init = dlt(points, &norm)?;
    Ok(refine_pose(&init, points, pixels, k, f64::INFINITY, 50))
}
