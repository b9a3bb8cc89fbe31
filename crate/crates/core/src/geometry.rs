use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quat::Quaternion;

/// Pinhole intrinsics. Pixel centers sit at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(Error::invalid("principal point outside the image"));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Pixel to normalized image coordinates (`K⁻¹`).
    pub fn normalize(&self, px: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new((px.x - self.cx) / self.fx, (px.y - self.cy) / self.fy)
    }

    pub fn denormalize(&self, n: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new(self.fx * n.x + self.cx, self.fy * n.y + self.cy)
    }

    /// Camera-frame point at depth `z` along the ray through pixel `px`.
    pub fn unproject(&self, px: &Vector2<f64>, z: f64) -> Vector3<f64> {
        let n = self.normalize(px);
        Vector3::new(n.x * z, n.y * z, z)
    }

    pub fn contains(&self, px: &Vector2<f64>) -> bool {
        px.x >= -0.5 && px.y >= -0.5 && px.x < self.width as f64 - 0.5 && px.y < self.height as f64 - 0.5
    }
}

/// World-to-camera rigid transform: `x_cam = R * x_world + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Quaternion,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self { rotation: Quaternion::IDENTITY, translation: Vector3::zeros() }
    }

    pub fn new(rotation: Quaternion, translation: Vector3<f64>) -> Result<Self> {
        rotation.ensure_unit()?;
        Ok(Self { rotation, translation })
    }

    pub fn from_matrix(r: &Matrix3<f64>, t: Vector3<f64>) -> Self {
        Self { rotation: Quaternion::from_rotation_matrix(r), translation: t }
    }

    /// Pose of a camera centered at `center` whose camera-to-world rotation is `orient`.
    pub fn from_center(orient: Quaternion, center: &Vector3<f64>) -> Self {
        let rotation = orient.conjugate();
        let translation = -rotation.rotate_unchecked(center);
        Self { rotation, translation }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix()
    }

    pub fn transform(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.rotate_unchecked(x) + self.translation
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vector3<f64> {
        -self.rotation.conjugate().rotate_unchecked(&self.translation)
    }

    pub fn inverse(&self) -> Pose {
        let rotation = self.rotation.conjugate();
        Pose { rotation, translation: -rotation.rotate_unchecked(&self.translation) }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.rotate_unchecked(&other.translation) + self.translation,
        }
    }

    /// Optical axis (camera +z) in world coordinates.
    pub fn viewing_direction(&self) -> Vector3<f64> {
        self.rotation.conjugate().rotate_unchecked(&Vector3::z())
    }
}

/// Pinhole projection of world point `x`; `None` when the point is not in
/// front of the camera (`z_cam <= 0`).
pub fn project(pose: &Pose, k: &CameraIntrinsics, x: &Vector3<f64>) -> Option<Vector2<f64>> {
    let p = pose.transform(x);
    if p.z <= 0.0 {
        return None;
    }
    Some(Vector2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}
