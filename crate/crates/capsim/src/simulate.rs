use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use roomscan_core::{
    CameraIntrinsics, CaptureStream, Error, Frame, ImuSample, Matrix3, Pose, Quaternion, Result, GRAVITY,
};

use crate::render::{render, Degradation};
use crate::scene::{Landmark, RoomScene};

/// Sub-poses averaged for a motion-blurred frame.
pub const BLUR_SUBPOSES: usize = 8;

/// Handheld capture trajectory and degradation model. Steps are frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub duration_s: f64,
    pub rate_fps: f64,
    /// Per-step position random walk, meters (vertical axis uses 40%).
    pub pos_walk_sigma: f64,
    /// Per-step pitch/roll jitter, radians.
    pub orient_jitter_sigma: f64,
    /// Per-step heading random walk, radians.
    pub yaw_drift_sigma: f64,
    /// Fraction of frames spent resting (pose held).
    pub dwell_fraction: f64,
    pub blur_fraction: f64,
    pub exposure_spread: f64,
    /// Camera positions reflect at this fraction of the room half extents.
    pub roam_fraction: f64,
    /// Translation swept during a blurred exposure, meters.
    pub blur_length: f64,
    /// Rotation swept during a blurred exposure, radians.
    pub blur_angle: f64,
    pub orient_noise_sigma: f64,
    pub accel_noise_sigma: f64,
    /// Per-axis hand acceleration of steady frames, m/s².
    pub steady_accel_sigma: f64,
    /// Range of hand acceleration magnitude for blurred (shaken) frames, m/s².
    pub shake_accel: [f64; 2],
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            duration_s: 600.0,
            rate_fps: 0.5,
            pos_walk_sigma: 0.04,
            orient_jitter_sigma: 0.03,
            yaw_drift_sigma: 0.12,
            dwell_fraction: 0.3,
            blur_fraction: 0.2,
            exposure_spread: 0.3,
            roam_fraction: 0.3,
            blur_length: 0.04,
            blur_angle: 0.03,
            orient_noise_sigma: 0.003,
            accel_noise_sigma: 0.05,
            steady_accel_sigma: 0.25,
            shake_accel: [5.0, 12.0],
        }
    }
}

impl TrajectoryConfig {
    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.rate_fps + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.duration_s > 0.0) || !(self.rate_fps > 0.0) {
            return bad("duration_s and rate_fps must be positive");
        }
        if self.duration_s * self.rate_fps < 2.0 {
            return bad("trajectory must contain at least two frames");
        }
        for (name, v) in [
            ("dwell_fraction", self.dwell_fraction),
            ("blur_fraction", self.blur_fraction),
            ("exposure_spread", self.exposure_spread),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.roam_fraction > 0.0 && self.roam_fraction < 1.0) {
            return bad("roam_fraction must lie in (0, 1)");
        }
        let nonneg = [
            self.pos_walk_sigma,
            self.orient_jitter_sigma,
            self.yaw_drift_sigma,
            self.blur_length,
            self.blur_angle,
            self.orient_noise_sigma,
            self.accel_noise_sigma,
            self.steady_accel_sigma,
        ];
        if nonneg.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("noise and blur magnitudes must be finite and nonnegative");
        }
        if !(0.0 <= self.shake_accel[0] && self.shake_accel[0] <= self.shake_accel[1]) {
            return bad("shake_accel must be an ordered nonnegative range");
        }
        Ok(())
    }

    /// Exposure gain range: `[1 - 0.9 s, 1 + 2 s]` for spread `s`, i.e. `[0.1, 3]` at `s = 1`.
    pub fn gain_range(&self) -> (f64, f64) {
        (1.0 - 0.9 * self.exposure_spread, 1.0 + 2.0 * self.exposure_spread)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameDegradation {
    pub blurred: bool,
    pub exposure_gain: f64,
}

/// Simulator ground truth. Poses are world-to-camera, keyed by frame id.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub poses: BTreeMap<u64, Pose>,
    pub landmarks: Vec<Landmark>,
    pub room_diagonal: f64,
    pub degradations: BTreeMap<u64, FrameDegradation>,
}

/// Camera-to-world attitude for heading `yaw`, elevation `pitch` and `roll`
/// about the optical axis. At zero angles the camera looks along world +x
/// with image x to world -y and image y to world -z.
pub fn camera_attitude(yaw: f64, pitch: f64, roll: f64) -> Quaternion {
    let base = Quaternion::from_rotation_matrix(&Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0));
    let qz = Quaternion::from_axis_angle(&Vector3::z(), yaw);
    let qy = Quaternion::from_axis_angle(&Vector3::y(), -pitch);
    let qr = Quaternion::from_axis_angle(&Vector3::z(), roll);
    qz * qy * base * qr
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const STREAM_TRAJECTORY: u64 = 1;
const STREAM_DEGRADATION: u64 = 2;
const STREAM_IMU: u64 = 3;

fn reflect(x: f64, bound: f64) -> f64 {
    let period = 4.0 * bound;
    let y = (x + bound).rem_euclid(period);
    if y <= 2.0 * bound {
        y - bound
    } else {
        3.0 * bound - y
    }
}

struct Attitude {
    center: Vector3<f64>,
    orient: Quaternion,
    dwelling: bool,
}

fn trajectory(scene: &RoomScene, traj: &TrajectoryConfig, n: usize, seed: u64) -> Vec<Attitude> {
    let mut rng = rng_for(seed, STREAM_TRAJECTORY);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let bounds = scene.half_extents * traj.roam_fraction;

    // segment lengths in frames: dwell U[3, 12], moving U[4, 16]
    let (mean_dwell, mean_move) = (7.5, 10.0);
    let f = traj.dwell_fraction;
    let p_dwell = if f >= 1.0 { 1.0 } else { f * mean_move / (f * mean_move + (1.0 - f) * mean_dwell) };

    let mut center = Vector3::new(
        bounds.x * rng.random_range(-0.5..0.5),
        bounds.y * rng.random_range(-0.5..0.5),
        bounds.z * rng.random_range(-0.5..0.5),
    );
    let mut yaw = rng.random_range(-PI..PI);
    let (mut pitch, mut roll) = (0.0f64, 0.0f64);
    let mut remaining = 0usize;
    let mut dwelling = false;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        if remaining == 0 {
            dwelling = rng.random::<f64>() < p_dwell;
            remaining = if dwelling { rng.random_range(3..=12) } else { rng.random_range(4..=16) };
        }
        remaining -= 1;
        if k > 0 && !dwelling {
            let step = Vector3::new(std.sample(&mut rng), std.sample(&mut rng), 0.4 * std.sample(&mut rng));
            center += step * traj.pos_walk_sigma;
            for a in 0..3 {
                center[a] = reflect(center[a], bounds[a]);
            }
            yaw += traj.yaw_drift_sigma * std.sample(&mut rng);
            pitch = (0.85 * pitch + traj.orient_jitter_sigma * std.sample(&mut rng)).clamp(-0.5, 0.5);
            roll = 0.85 * roll + 0.5 * traj.orient_jitter_sigma * std.sample(&mut rng);
        }
        out.push(Attitude { center, orient: camera_attitude(yaw, pitch, roll), dwelling });
    }
    out
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let v: [f64; 3] = UnitSphere.sample(rng);
    Vector3::from(v)
}

/// Eight poses spread symmetrically about frame `k` along its inter-frame
/// translation and rotation directions.
fn blur_subposes(
    att: &[Attitude],
    k: usize,
    traj: &TrajectoryConfig,
    rng: &mut ChaCha8Rng,
    scene: &RoomScene,
) -> Vec<Pose> {
    let prev = &att[k.saturating_sub(1)];
    let next = &att[(k + 1).min(att.len() - 1)];
    let fallback_dir = random_unit(rng);
    let fallback_axis = random_unit(rng);
    let dv = next.center - prev.center;
    let dir = if dv.norm() > 1e-9 { dv.normalize() } else { fallback_dir };
    let rv = (next.orient * prev.orient.conjugate()).to_rotation_vector();
    let axis = if rv.norm() > 1e-9 { rv.normalize() } else { fallback_axis };
    let me = &att[k];
    (0..BLUR_SUBPOSES)
        .map(|j| {
            let f = j as f64 / (BLUR_SUBPOSES - 1) as f64 - 0.5;
            let mut c = me.center + dir * (f * traj.blur_length);
            for a in 0..3 {
                let lim = scene.half_extents[a] * 0.999;
                c[a] = c[a].clamp(-lim, lim);
            }
            let q = Quaternion::from_axis_angle(&axis, f * traj.blur_angle) * me.orient;
            Pose::from_center(q, &c)
        })
        .collect()
}

/// Generates a capture stream with its ground truth.
///
/// Three independent random streams drive the trajectory, the image
/// degradation and the IMU noise, so changing blur or exposure settings
/// leaves the trajectory untouched.
pub fn simulate(
    scene: &RoomScene,
    traj: &TrajectoryConfig,
    k: &CameraIntrinsics,
    seed: u64,
) -> Result<(CaptureStream, GroundTruth)> {
    scene.validate()?;
    traj.validate()?;
    k.validate()?;
    let n = traj.frame_count();
    let att = trajectory(scene, traj, n, seed);

    let mut deg_rng = rng_for(seed, STREAM_DEGRADATION);
    let (g_lo, g_hi) = traj.gain_range();
    let mut plans = Vec::with_capacity(n);
    for i in 0..n {
        let blurred = deg_rng.random::<f64>() < traj.blur_fraction;
        let u: f64 = deg_rng.random();
        let gain = (g_lo.ln() + u * (g_hi.ln() - g_lo.ln())).exp();
        let subposes = blur_subposes(&att, i, traj, &mut deg_rng, scene);
        let degradation = Degradation {
            blur_subposes: if blurred && traj.blur_fraction > 0.0 { subposes } else { Vec::new() },
            exposure_gain: if traj.exposure_spread > 0.0 { gain } else { 1.0 },
        };
        plans.push((blurred, degradation));
    }

    let mut imu_rng = rng_for(seed, STREAM_IMU);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut samples = Vec::with_capacity(n);
    for (i, a) in att.iter().enumerate() {
        let t_us = (i as f64 / traj.rate_fps * 1e6).round() as u64;
        let noise = Vector3::new(std.sample(&mut imu_rng), std.sample(&mut imu_rng), std.sample(&mut imu_rng));
        let orient = (a.orient * Quaternion::from_rotation_vector(&(noise * traj.orient_noise_sigma))).normalized()?;
        let steady = Vector3::new(std.sample(&mut imu_rng), std.sample(&mut imu_rng), std.sample(&mut imu_rng));
        let shake_dir = random_unit(&mut imu_rng);
        let shake_mag = traj.shake_accel[0] + (traj.shake_accel[1] - traj.shake_accel[0]) * imu_rng.random::<f64>();
        let sensor = Vector3::new(std.sample(&mut imu_rng), std.sample(&mut imu_rng), std.sample(&mut imu_rng));
        let motion = if plans[i].0 {
            shake_dir * shake_mag
        } else if a.dwelling {
            Vector3::zeros()
        } else {
            steady * traj.steady_accel_sigma
        };
        let specific_force = motion + Vector3::new(0.0, 0.0, GRAVITY);
        let accel = a.orient.conjugate().rotate_unchecked(&specific_force) + sensor * traj.accel_noise_sigma;
        samples.push(ImuSample::new(t_us, orient, accel, None)?);
    }

    let poses: Vec<Pose> = att.iter().map(|a| Pose::from_center(a.orient, &a.center)).collect();
    let images =
        (0..n).into_par_iter().map(|i| render(scene, &poses[i], k, &plans[i].1)).collect::<Result<Vec<_>>>()?;

    let frames = images
        .into_iter()
        .zip(&samples)
        .enumerate()
        .map(|(i, (image, imu))| Frame::new(i as u64, imu.t_us, image, *imu))
        .collect::<Result<Vec<_>>>()?;
    let stream = CaptureStream::new(*k, frames)?;
    let gt = GroundTruth {
        poses: poses.iter().enumerate().map(|(i, p)| (i as u64, *p)).collect(),
        landmarks: scene.landmarks(),
        room_diagonal: scene.diagonal(),
        degradations: plans
            .iter()
            .enumerate()
            .map(|(i, (blurred, d))| (i as u64, FrameDegradation { blurred: *blurred, exposure_gain: d.exposure_gain }))
            .collect(),
    };
    Ok((stream, gt))
}
