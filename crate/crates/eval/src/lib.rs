//! Similarity alignment of reconstructions against simulator ground truth.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use roomscan_capsim::GroundTruth;
use roomscan_core::{project, Error, Pose, Quaternion, Result};
use roomscan_sfm::{rotation_angle_between, SparseModel};
use serde::{Deserialize, Serialize};

/// Observations within this many pixels of a projected landmark vote for it.
pub const LANDMARK_MATCH_PX: f64 = 2.0;
/// Fallback matching radius as a fraction of the room diagonal.
pub const NN_FALLBACK_FRACTION: f64 = 0.05;

/// `y ≈ scale · R · x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.scale * self.rotation * x + self.translation
    }

    /// Sum of squared alignment residuals.
    pub fn cost(&self, x: &[Vector3<f64>], y: &[Vector3<f64>]) -> f64 {
        x.iter().zip(y).map(|(a, b)| (self.apply(a) - b).norm_squared()).sum()
    }
}

/// Closed-form least-squares similarity taking `estimated` onto `reference`.
pub fn umeyama_align(estimated: &[Vector3<f64>], reference: &[Vector3<f64>]) -> Result<Similarity> {
    if estimated.len() != reference.len() {
        return Err(Error::InvalidArgument("point lists differ in length".into()));
    }
    let n = estimated.len();
    if n < 3 {
        return Err(Error::DegenerateInput(format!("alignment needs 3 point pairs, got {n}")));
    }
    let nf = n as f64;
    let mx = estimated.iter().sum::<Vector3<f64>>() / nf;
    let my = reference.iter().sum::<Vector3<f64>>() / nf;
    let var_x = estimated.iter().map(|x| (x - mx).norm_squared()).sum::<f64>() / nf;
    let cov =
        estimated.iter().zip(reference).fold(Matrix3::zeros(), |a, (x, y)| a + (y - my) * (x - mx).transpose()) / nf;
    let svd = cov.svd(true, true);
    let d = svd.singular_values;
    // singular values come out sorted in descending order
    if !(var_x > 0.0) || !(d[1] > 1e-12 * d[0].max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateInput("point sets do not span a plane".into()));
    }
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        s.z = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&s) * v_t;
    let scale = d.component_mul(&s).sum() / var_x;
    Ok(Similarity { scale, rotation, translation: my - scale * rotation * mx })
}

/// Applies `sim` to a model: points move, camera poses follow so that every
/// observation keeps its pixel.
pub fn transform_model(model: &SparseModel, sim: &Similarity) -> SparseModel {
    let mut out = model.clone();
    for x in out.points.values_mut() {
        *x = sim.apply(x);
    }
    for p in out.poses.values_mut() {
        let r = p.rotation_matrix() * sim.rotation.transpose();
        let t = sim.scale * p.translation - r * sim.translation;
        *p = Pose { rotation: Quaternion::from_rotation_matrix(&r), translation: t };
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedError {
    pub scale: f64,
    pub rotation: Quaternion,
    pub translation: Vector3<f64>,
    pub matched_points: usize,
    pub median_point_err_m: f64,
    pub mean_point_err_m: f64,
    pub median_rel_err: f64,
    /// Per registered frame with a ground-truth pose, in frame order.
    pub pose_rot_err_deg: BTreeMap<u64, f64>,
    pub reproj_rmse_px: f64,
}

/// Landmark index per model point, voted by the observations' distance to
/// landmarks projected with the ground-truth pose of each observing frame.
fn match_by_projection(model: &SparseModel, gt: &GroundTruth) -> BTreeMap<u64, usize> {
    let k = &model.intrinsics;
    let mut projected: BTreeMap<u64, Vec<(usize, nalgebra::Vector2<f64>)>> = BTreeMap::new();
    for id in model.poses.keys() {
        let Some(pose) = gt.poses.get(id) else { continue };
        let list = gt
            .landmarks
            .iter()
            .enumerate()
            .filter_map(|(i, l)| project(pose, k, &l.position).filter(|p| k.contains(p)).map(|p| (i, p)))
            .collect();
        projected.insert(*id, list);
    }
    let mut out = BTreeMap::new();
    for track in &model.tracks {
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for o in &track.observations {
            let Some(list) = projected.get(&o.frame_id) else { continue };
            let best = list
                .iter()
                .map(|(i, p)| (*i, (p - o.pixel).norm()))
                .filter(|(_, d)| *d <= LANDMARK_MATCH_PX)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((i, _)) = best {
                *votes.entry(i).or_default() += 1;
            }
        }
        if let Some((&lm, &n)) = votes.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) {
            if 2 * n > track.observations.len() {
                out.insert(track.point_id, lm);
            }
        }
    }
    out
}

/// Nearest landmark within the fallback radius, in model coordinates.
fn match_by_position(model: &SparseModel, gt: &GroundTruth) -> BTreeMap<u64, usize> {
    let radius = NN_FALLBACK_FRACTION * gt.room_diagonal;
    model
        .points
        .iter()
        .filter_map(|(id, x)| {
            gt.landmarks
                .iter()
                .enumerate()
                .map(|(i, l)| (i, (l.position - x).norm()))
                .filter(|(_, d)| *d <= radius)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| (*id, i))
        })
        .collect()
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Aligns `model` to the ground truth and measures point, pose and
/// reprojection errors.
pub fn evaluate_model(model: &SparseModel, gt: &GroundTruth) -> Result<AlignedError> {
    if !(gt.room_diagonal > 0.0) {
        return Err(Error::InvalidArgument("room diagonal must be positive".into()));
    }
    let mut matches = match_by_projection(model, gt);
    if matches.len() < 3 {
        matches = match_by_position(model, gt);
    }
    if matches.len() < 3 {
        return Err(Error::DegenerateInput(format!("only {} points match ground-truth landmarks", matches.len())));
    }
    let est: Vec<Vector3<f64>> = matches.keys().map(|id| model.points[id]).collect();
    let reference: Vec<Vector3<f64>> = matches.values().map(|&i| gt.landmarks[i].position).collect();
    let sim = umeyama_align(&est, &reference)?;
    let mut errs: Vec<f64> = est.iter().zip(&reference).map(|(x, y)| (sim.apply(x) - y).norm()).collect();
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    let med = median(&mut errs);

    let pose_rot_err_deg = model
        .poses
        .iter()
        .filter_map(|(id, p)| {
            let g = gt.poses.get(id)?;
            let aligned = p.rotation_matrix() * sim.rotation.transpose();
            Some((*id, rotation_angle_between(&aligned, &g.rotation_matrix()).to_degrees()))
        })
        .collect();
    Ok(AlignedError {
        scale: sim.scale,
        rotation: Quaternion::from_rotation_matrix(&sim.rotation),
        translation: sim.translation,
        matched_points: est.len(),
        median_point_err_m: med,
        mean_point_err_m: mean,
        median_rel_err: med / gt.room_diagonal,
        pose_rot_err_deg,
        reproj_rmse_px: model.reprojection_rmse(),
    })
}

/// How the kept frames of a reduction compare with the simulator's
/// degradation labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionSummary {
    pub total: usize,
    pub kept: usize,
    pub reduction_ratio: f64,
    pub kept_blurred: usize,
    pub kept_badly_exposed: usize,
}

/// Counts kept frames the simulator degraded: blurred, or with an exposure
/// gain outside `[1 / gain_tol, gain_tol]`.
pub fn reduction_summary(total: usize, kept_ids: &[u64], gt: &GroundTruth, gain_tol: f64) -> ReductionSummary {
    let deg = |id: &u64| gt.degradations.get(id);
    let kept_blurred = kept_ids.iter().filter(|id| deg(id).is_some_and(|d| d.blurred)).count();
    let kept_badly_exposed = kept_ids
        .iter()
        .filter(|id| deg(id).is_some_and(|d| d.exposure_gain > gain_tol || d.exposure_gain < 1.0 / gain_tol))
        .count();
    ReductionSummary {
        total,
        kept: kept_ids.len(),
        reduction_ratio: if total == 0 { 0.0 } else { 1.0 - kept_ids.len() as f64 / total as f64 },
        kept_blurred,
        kept_badly_exposed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.2),
            Vector3::new(0.0, 1.5, -0.3),
            Vector3::new(0.4, 0.3, 1.0),
            Vector3::new(-0.7, 0.2, 0.5),
        ]
    }

    #[test]
    fn identical_clouds() {
        let s = umeyama_align(&cloud(), &cloud()).unwrap();
        assert!((s.scale - 1.0).abs() < 1e-12);
        assert!((s.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(s.translation.norm() < 1e-12);
    }

    #[test]
    fn scaled_and_shifted() {
        let y: Vec<_> = cloud().iter().map(|x| 2.0 * x + Vector3::new(1.0, 2.0, 3.0)).collect();
        let s = umeyama_align(&cloud(), &y).unwrap();
        assert!((s.scale - 2.0).abs() < 1e-12);
        assert!((s.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!((s.translation - Vector3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        let two = &cloud()[..2];
        assert_eq!(umeyama_align(two, two).unwrap_err().kind(), "degenerate-input");
        let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(umeyama_align(&line, &line).unwrap_err().kind(), "degenerate-input");
    }
}
