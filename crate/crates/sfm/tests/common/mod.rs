#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roomscan_core::{project, CameraIntrinsics, Pose, Quaternion};
use roomscan_sfm::{Gauge, Observation, SparseModel, Track};

pub fn intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(400.0, 400.0, 320.0, 240.0, 640, 480).unwrap()
}

pub fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Quaternion {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let axis = if axis.norm() < 1e-3 { Vector3::z() } else { axis.normalize() };
    Quaternion::from_axis_angle(&axis, rng.random_range(-max_angle..max_angle))
}

/// Points in a box in front of the identity camera.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| Vector3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.0..1.0), rng.random_range(3.0..6.0)))
        .collect()
}

/// A second camera displaced sideways and turned slightly, so that the box
/// of [`random_points`] stays in view.
pub fn second_pose(rng: &mut ChaCha8Rng) -> Pose {
    let center = Vector3::new(rng.random_range(-0.8..0.8), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let center = if center.norm() < 0.2 { Vector3::new(0.5, 0.0, 0.0) } else { center };
    let orient = random_rotation(rng, 0.2);
    Pose::from_center(orient, &center)
}

/// Random scene: `cams` poses around the origin looking down +z and
/// `pts` points all visible from every camera.
pub fn random_model(seed: u64, cams: usize, pts: usize) -> SparseModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = intrinsics();
    let mut poses = BTreeMap::new();
    poses.insert(0, Pose::identity());
    for i in 1..cams as u64 {
        poses.insert(i * 10, second_pose(&mut rng));
    }
    let mut points = BTreeMap::new();
    let mut tracks = Vec::new();
    let mut id = 0u64;
    while points.len() < pts {
        let x = random_points(&mut rng, 1)[0];
        let obs: Option<Vec<Observation>> = poses
            .iter()
            .enumerate()
            .map(|(fi, (f, p))| {
                let u = project(p, &k, &x).filter(|u| k.contains(u))?;
                Some(Observation { frame_id: *f, feature_index: fi, pixel: u })
            })
            .collect();
        if let Some(observations) = obs {
            points.insert(id, x);
            tracks.push(Track { point_id: id, observations });
            id += 1;
        }
    }
    let ids: Vec<u64> = poses.keys().copied().collect();
    SparseModel { intrinsics: k, poses, points, tracks, gauge: Gauge { fixed: ids[0], scale: ids[1] } }
}

pub fn pixel_pairs(
    pa: &Pose,
    pb: &Pose,
    k: &CameraIntrinsics,
    pts: &[Vector3<f64>],
) -> Vec<(Vector2<f64>, Vector2<f64>)> {
    pts.iter().map(|x| (project(pa, k, x).unwrap(), project(pb, k, x).unwrap())).collect()
}
