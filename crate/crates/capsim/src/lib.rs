//! Synthetic opportunistic capture: a textured box room seen by a handheld
//! camera sampled at a low frame rate, with motion blur, exposure errors and
//! an attitude/accelerometer trace per frame.

pub mod io;
pub mod render;
pub mod scene;
pub mod simulate;

pub use render::{render, Degradation};
pub use scene::{Landmark, LandmarkKind, RoomScene, Wall};
pub use simulate::{camera_attitude, simulate, FrameDegradation, GroundTruth, TrajectoryConfig};

use roomscan_core::{CameraIntrinsics, Result};

/// Default camera: 320x240, about 63° horizontal field of view.
pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics { fx: 260.0, fy: 260.0, cx: 159.5, cy: 119.5, width: 320, height: 240 }
}

/// Clean render of `pose`: no blur, unit gain.
pub fn render_clean(
    scene: &RoomScene,
    pose: &roomscan_core::Pose,
    k: &CameraIntrinsics,
) -> Result<roomscan_core::GrayImage> {
    render(scene, pose, k, &Degradation::clean())
}
