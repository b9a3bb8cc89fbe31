//! Shared primitives for the roomscan pipeline: unit quaternions, camera
//! poses and intrinsics, 8-bit luminance images, IMU samples and capture
//! streams.
//!
//! Poses are world-to-camera throughout: `x_cam = R * x_world + t`.

pub mod error;
pub mod geometry;
pub mod image;
pub mod pgm;
pub mod quat;
pub mod stream;

pub use error::{Error, Result};
pub use geometry::{project, CameraIntrinsics, Pose};
pub use image::GrayImage;
pub use quat::{quat_angular_distance, quat_rotate, Quaternion};
pub use stream::{nearest_imu_sample, CaptureStream, Frame, ImuSample, SensorRecord, IMU_MATCH_WINDOW_US};

pub use nalgebra::{Matrix3, Vector2, Vector3};

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;
