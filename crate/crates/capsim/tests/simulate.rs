use roomscan_capsim::io::{ground_truth_from_json, ground_truth_to_json};
use roomscan_capsim::{default_intrinsics, render_clean, simulate, RoomScene, TrajectoryConfig};
use roomscan_core::{quat_angular_distance, CameraIntrinsics};

fn small_camera() -> CameraIntrinsics {
    CameraIntrinsics { fx: 80.0, fy: 80.0, cx: 39.5, cy: 29.5, width: 80, height: 60 }
}

#[test]
fn default_duration_yields_300_frames() {
    let traj = TrajectoryConfig::default();
    let (stream, gt) = simulate(&RoomScene::default(), &traj, &small_camera(), 0).unwrap();
    assert_eq!(stream.frames.len(), 300);
    assert_eq!(gt.poses.len(), 300);
    for f in &stream.frames {
        assert!((f.imu.orient.norm() - 1.0).abs() < 1e-9);
    }
    let scene = RoomScene::default();
    for pose in gt.poses.values() {
        assert!(scene.contains(&pose.center()));
    }
    assert!((gt.room_diagonal - scene.diagonal()).abs() < 1e-15);
}

#[test]
fn same_seed_same_stream() {
    let traj = TrajectoryConfig { duration_s: 40.0, blur_fraction: 0.5, exposure_spread: 0.5, ..Default::default() };
    let a = simulate(&RoomScene::default(), &traj, &small_camera(), 11).unwrap();
    let b = simulate(&RoomScene::default(), &traj, &small_camera(), 11).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    let c = simulate(&RoomScene::default(), &traj, &small_camera(), 12).unwrap();
    assert_ne!(a.1.poses, c.1.poses);
}

#[test]
fn undegraded_frames_equal_clean_renders() {
    let traj = TrajectoryConfig { duration_s: 30.0, blur_fraction: 0.0, exposure_spread: 0.0, ..Default::default() };
    let scene = RoomScene::default();
    let k = small_camera();
    let (stream, gt) = simulate(&scene, &traj, &k, 3).unwrap();
    for f in &stream.frames {
        let clean = render_clean(&scene, &gt.poses[&f.id], &k).unwrap();
        assert_eq!(f.image, clean, "frame {}", f.id);
    }
}

#[test]
fn noiseless_imu_orientation_matches_pose() {
    let traj = TrajectoryConfig { duration_s: 60.0, orient_noise_sigma: 0.0, ..Default::default() };
    let (stream, gt) = simulate(&RoomScene::default(), &traj, &small_camera(), 5).unwrap();
    for f in &stream.frames {
        let cam = f.imu.orient.conjugate();
        let d = quat_angular_distance(&cam, &gt.poses[&f.id].rotation).unwrap();
        assert!(d < 1e-7, "frame {} differs by {d}", f.id);
    }
}

#[test]
fn blur_settings_do_not_move_the_trajectory() {
    let base = TrajectoryConfig { duration_s: 40.0, ..Default::default() };
    let blurry = TrajectoryConfig { blur_fraction: 0.9, exposure_spread: 0.8, ..base.clone() };
    let (_, a) = simulate(&RoomScene::default(), &base, &small_camera(), 9).unwrap();
    let (_, b) = simulate(&RoomScene::default(), &blurry, &small_camera(), 9).unwrap();
    assert_eq!(a.poses, b.poses);
}

#[test]
fn stationary_frames_sense_gravity() {
    let traj = TrajectoryConfig {
        duration_s: 60.0,
        blur_fraction: 0.0,
        accel_noise_sigma: 0.0,
        steady_accel_sigma: 0.0,
        ..Default::default()
    };
    let (stream, _) = simulate(&RoomScene::default(), &traj, &small_camera(), 2).unwrap();
    for f in &stream.frames {
        assert!((f.imu.accel.norm() - roomscan_core::GRAVITY).abs() < 1e-9);
    }
}

#[test]
fn ground_truth_json_round_trip() {
    let traj = TrajectoryConfig { duration_s: 10.0, ..Default::default() };
    let (_, gt) = simulate(&RoomScene::default(), &traj, &default_intrinsics(), 1).unwrap();
    let back = ground_truth_from_json(&ground_truth_to_json(&gt)).unwrap();
    assert_eq!(back.landmarks, gt.landmarks);
    assert_eq!(back.poses.len(), gt.poses.len());
    for (id, p) in &gt.poses {
        assert!((back.poses[id].translation - p.translation).norm() < 1e-15);
    }
    assert!(ground_truth_from_json("{\"room_diagonal\": 1.0}").is_err());
}

#[test]
fn simulation_directory_round_trip() {
    let traj = TrajectoryConfig { duration_s: 8.0, ..Default::default() };
    let k = small_camera();
    let (stream, gt) = simulate(&RoomScene::default(), &traj, &k, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    roomscan_capsim::io::write_simulation(dir.path(), &stream, &gt).unwrap();
    let back = roomscan_core::pgm::read_capture_dir(dir.path()).unwrap();
    assert_eq!(back.frames.len(), stream.frames.len());
    for (a, b) in back.frames.iter().zip(&stream.frames) {
        assert_eq!(a.image, b.image);
        assert_eq!(a.id, b.id);
    }
    let gt_back =
        roomscan_capsim::io::read_ground_truth(&dir.path().join(roomscan_capsim::io::GROUND_TRUTH_FILE)).unwrap();
    assert_eq!(gt_back.degradations, gt.degradations);
}

mod casting {
    use proptest::prelude::*;
    use roomscan_capsim::RoomScene;
    use roomscan_core::Vector3;

    proptest! {
        /// Hits lie on the reported wall, inside its extent, along the ray,
        /// and no other wall is crossed first.
        #[test]
        fn rays_hit_the_nearest_wall(
            o in (-0.9f64..0.9, -0.9f64..0.9, -0.9f64..0.9),
            d in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        ) {
            let scene = RoomScene::default();
            let h = scene.half_extents;
            let origin = Vector3::new(o.0 * h.x, o.1 * h.y, o.2 * h.z);
            let dir = Vector3::new(d.0, d.1, d.2);
            prop_assume!(dir.norm() > 1e-3);
            let (wall, u, v) = scene.cast(&origin, &dir).unwrap();
            let hit = scene.wall_point(wall, u, v);
            let (eu, ev) = scene.wall_extent(wall);
            prop_assert!(u.abs() <= eu + 1e-9 && v.abs() <= ev + 1e-9);
            let s = (hit - origin).dot(&dir) / dir.norm_squared();
            prop_assert!(s > 0.0);
            prop_assert!((origin + dir * s - hit).norm() < 1e-9);
            // halfway to the hit is still strictly inside
            prop_assert!(scene.contains(&(origin + dir * (0.5 * s))));
        }
    }
}
