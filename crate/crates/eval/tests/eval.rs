use std::collections::BTreeMap;

use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use roomscan_capsim::{default_intrinsics, simulate, GroundTruth, RoomScene, TrajectoryConfig};
use roomscan_core::project;
use roomscan_eval::*;
use roomscan_sfm::{reconstruct, Gauge, Observation, ReconstructOptions, SparseModel, Track};

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let v = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    Rotation3::new(v).into_inner()
}

fn small_gt() -> GroundTruth {
    let traj = TrajectoryConfig { duration_s: 12.0, blur_fraction: 0.0, exposure_spread: 0.0, ..Default::default() };
    simulate(&RoomScene::default(), &traj, &default_intrinsics(), 0).unwrap().1
}

/// A model whose poses and points are the ground truth, observed at the
/// exact projections of the landmarks.
fn model_from_gt(gt: &GroundTruth) -> SparseModel {
    let k = default_intrinsics();
    let mut points = BTreeMap::new();
    let mut tracks = Vec::new();
    for (i, l) in gt.landmarks.iter().enumerate() {
        let observations: Vec<Observation> = gt
            .poses
            .iter()
            .filter_map(|(f, p)| {
                let u = project(p, &k, &l.position).filter(|u| k.contains(u))?;
                Some(Observation { frame_id: *f, feature_index: i, pixel: u })
            })
            .collect();
        if observations.len() >= 2 {
            points.insert(i as u64, l.position);
            tracks.push(Track { point_id: i as u64, observations });
        }
    }
    let ids: Vec<u64> = gt.poses.keys().copied().collect();
    SparseModel {
        intrinsics: k,
        poses: gt.poses.clone(),
        points,
        tracks,
        gauge: Gauge { fixed: ids[0], scale: ids[1] },
    }
}

#[test]
fn umeyama_beats_random_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let x: Vec<Vector3<f64>> = (0..10)
        .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let truth =
        Similarity { scale: 1.7, rotation: random_rotation(&mut rng), translation: Vector3::new(0.3, -2.0, 1.0) };
    let y: Vec<Vector3<f64>> = x
        .iter()
        .map(|p| truth.apply(p) + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)))
        .collect();
    let best = umeyama_align(&x, &y).unwrap();
    assert!((best.rotation.determinant() - 1.0).abs() < 1e-12);
    let c = best.cost(&x, &y);
    for i in 0..1000 {
        let cand = if i % 2 == 0 {
            Similarity {
                scale: rng.random_range(0.1..4.0),
                rotation: random_rotation(&mut rng),
                translation: Vector3::new(
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-3.0..3.0),
                ),
            }
        } else {
            // local perturbations around the closed form
            let d = Rotation3::new(Vector3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), 0.0))
                .into_inner();
            Similarity {
                scale: best.scale * rng.random_range(0.97..1.03),
                rotation: d * best.rotation,
                translation: best.translation
                    + Vector3::new(rng.random_range(-0.05..0.05), 0.0, rng.random_range(-0.05..0.05)),
            }
        };
        assert!(c <= cand.cost(&x, &y), "candidate {i} beats the closed form");
    }
}

#[test]
fn ground_truth_model_has_zero_error() {
    let gt = small_gt();
    let m = model_from_gt(&gt);
    let e = evaluate_model(&m, &gt).unwrap();
    assert!((e.scale - 1.0).abs() < 1e-9);
    assert!(e.median_point_err_m < 1e-9 && e.mean_point_err_m < 1e-9);
    assert!(e.pose_rot_err_deg.values().all(|v| *v < 1e-6));
    assert!(e.reproj_rmse_px < 1e-9);
    assert_eq!(e.matched_points, m.points.len());

    let half =
        transform_model(&m, &Similarity { scale: 0.5, rotation: Matrix3::identity(), translation: Vector3::zeros() });
    let e = evaluate_model(&half, &gt).unwrap();
    assert!((e.scale - 2.0).abs() < 1e-9);
    assert!(e.median_point_err_m < 1e-9);
}

#[test]
fn too_few_matches_is_degenerate() {
    let gt = small_gt();
    let mut m = model_from_gt(&gt);
    m.tracks.truncate(2);
    m.points.retain(|id, _| *id == m.tracks[0].point_id || *id == m.tracks[1].point_id);
    for t in &mut m.tracks {
        for o in &mut t.observations {
            o.pixel.x += 50.0;
        }
    }
    for x in m.points.values_mut() {
        *x += Vector3::new(5.0, 5.0, 5.0);
    }
    assert_eq!(evaluate_model(&m, &gt).unwrap_err().kind(), "degenerate-input");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn alignment_invariance(seed in 0u64..1_000_000) {
        let gt = small_gt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = model_from_gt(&gt);
        for x in m.points.values_mut() {
            *x += Vector3::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02));
        }
        let sim = Similarity {
            scale: rng.random_range(0.2..5.0),
            rotation: random_rotation(&mut rng),
            translation: Vector3::new(rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0)),
        };
        let a = evaluate_model(&m, &gt).unwrap();
        let b = evaluate_model(&transform_model(&m, &sim), &gt).unwrap();
        prop_assert!((a.median_point_err_m - b.median_point_err_m).abs() < 1e-9);
        prop_assert!((a.mean_point_err_m - b.mean_point_err_m).abs() < 1e-9);
        prop_assert!((a.median_rel_err - b.median_rel_err).abs() < 1e-9);
        prop_assert!((a.reproj_rmse_px - b.reproj_rmse_px).abs() < 1e-9);
        for (id, v) in &a.pose_rot_err_deg {
            prop_assert!((v - b.pose_rot_err_deg[id]).abs() < 1e-9);
        }
        prop_assert_eq!(a.median_rel_err, a.median_point_err_m / gt.room_diagonal);
    }
}

#[test]
fn clean_walkthrough_is_accurate() {
    let traj = TrajectoryConfig { duration_s: 60.0, blur_fraction: 0.0, exposure_spread: 0.0, ..Default::default() };
    let k = default_intrinsics();
    let (stream, gt) = simulate(&RoomScene::default(), &traj, &k, 0).unwrap();
    assert_eq!(stream.len(), 30);
    let r = reconstruct(&stream.frames, &k, &ReconstructOptions::default()).unwrap();
    assert!(r.model.poses.len() >= 27);
    let e = evaluate_model(&r.model, &gt).unwrap();
    assert!(e.median_rel_err < 0.01, "{}", e.median_rel_err);
    assert!(e.reproj_rmse_px < 0.5);
}

#[test]
fn reduction_summary_counts_degraded_frames() {
    let traj = TrajectoryConfig { duration_s: 40.0, blur_fraction: 0.5, exposure_spread: 1.0, ..Default::default() };
    let (_, gt) = simulate(&RoomScene::default(), &traj, &default_intrinsics(), 3).unwrap();
    let ids: Vec<u64> = gt.poses.keys().copied().collect();
    let s = reduction_summary(ids.len(), &ids, &gt, 2.0);
    assert_eq!(s.kept, 20);
    assert_eq!(s.reduction_ratio, 0.0);
    assert_eq!(s.kept_blurred, gt.degradations.values().filter(|d| d.blurred).count());
    let none = reduction_summary(ids.len(), &[], &gt, 2.0);
    assert_eq!((none.kept, none.kept_blurred, none.reduction_ratio), (0, 0, 1.0));
}
