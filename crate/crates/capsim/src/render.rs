use nalgebra::Vector3;
use rayon::prelude::*;

use roomscan_core::{CameraIntrinsics, Error, GrayImage, Pose, Result};

use crate::scene::RoomScene;

/// Image degradation applied by [`render`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Degradation {
    /// Poses averaged for motion blur; empty renders the nominal pose only.
    pub blur_subposes: Vec<Pose>,
    pub exposure_gain: f64,
}

impl Degradation {
    pub fn clean() -> Self {
        Self { blur_subposes: Vec::new(), exposure_gain: 1.0 }
    }
}

/// Ray-cast render of the room from `pose`.
///
/// Each pixel averages `samples_per_axis²` rays on a regular sub-pixel grid
/// for every blur sub-pose, then scales by the exposure gain, clamps to
/// `[0, 255]` and rounds. Rows are rendered in parallel and assembled in
/// order, so the output does not depend on the thread count.
pub fn render(scene: &RoomScene, pose: &Pose, k: &CameraIntrinsics, degrade: &Degradation) -> Result<GrayImage> {
    k.validate()?;
    scene.validate()?;
    if !(degrade.exposure_gain >= 0.0 && degrade.exposure_gain.is_finite()) {
        return Err(Error::InvalidArgument("exposure gain must be finite and nonnegative".into()));
    }
    let poses: Vec<Pose> = if degrade.blur_subposes.is_empty() { vec![*pose] } else { degrade.blur_subposes.clone() };
    for p in std::iter::once(pose).chain(&poses) {
        p.rotation.ensure_unit()?;
        if !scene.contains(&p.center()) {
            return Err(Error::InvalidArgument("camera center is not strictly inside the room".into()));
        }
    }
    let views: Vec<(Vector3<f64>, nalgebra::Matrix3<f64>)> =
        poses.iter().map(|p| (p.center(), p.rotation_matrix().transpose())).collect();

    let s = scene.samples_per_axis;
    let offsets: Vec<f64> = (0..s).map(|i| (i as f64 + 0.5) / s as f64 - 0.5).collect();
    let norm = 1.0 / (views.len() * offsets.len() * offsets.len()) as f64;
    let (w, h) = (k.width as usize, k.height as usize);

    let rows: Vec<Vec<u8>> = (0..h)
        .into_par_iter()
        .map(|py| {
            let mut row = Vec::with_capacity(w);
            for px in 0..w {
                let mut acc = 0.0;
                for (center, cam_to_world) in &views {
                    for &oy in &offsets {
                        let ny = (py as f64 + oy - k.cy) / k.fy;
                        for &ox in &offsets {
                            let nx = (px as f64 + ox - k.cx) / k.fx;
                            let dir = cam_to_world * Vector3::new(nx, ny, 1.0);
                            acc += scene.luminance_along(center, &dir);
                        }
                    }
                }
                let v = (acc * norm * degrade.exposure_gain).clamp(0.0, 255.0).round();
                row.push(v as u8);
            }
            row
        })
        .collect();
    GrayImage::new(k.width, k.height, rows.concat())
}
