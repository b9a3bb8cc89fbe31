use std::ops::{Mul, Neg};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm deviation above which operations reject a quaternion as non-unit.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Rotation quaternion `w + xi + yj + zk`.
///
/// Constructors that take arbitrary components normalize; [`Quaternion::raw`]
/// does not, so operations re-check the unit norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    /// Components exactly as given, without normalization.
    pub const fn raw(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Normalized quaternion from components. Fails on a zero or non-finite vector.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        Self::raw(w, x, y, z).normalized()
    }

    pub fn from_array(c: [f64; 4]) -> Result<Self> {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n;
        Self::raw(c, s * a.x, s * a.y, s * a.z)
    }

    /// Exponential map of a rotation vector.
    pub fn from_rotation_vector(v: &Vector3<f64>) -> Self {
        Self::from_axis_angle(v, v.norm())
    }

    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Self {
        let rot = Rotation3::from_matrix_unchecked(*m);
        Self::from_nalgebra(&UnitQuaternion::from_rotation_matrix(&rot))
    }

    pub fn from_nalgebra(q: &UnitQuaternion<f64>) -> Self {
        Self::raw(q.w, q.i, q.j, q.k)
    }

    pub fn to_nalgebra(self) -> UnitQuaternion<f64> {
        UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(self.w, self.x, self.y, self.z))
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn normalized(self) -> Result<Self> {
        let n = self.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::invalid("quaternion has zero or non-finite norm"));
        }
        Ok(Self::raw(self.w / n, self.x / n, self.y / n, self.z / n))
    }

    pub fn conjugate(self) -> Self {
        Self::raw(self.w, -self.x, -self.y, -self.z)
    }

    pub fn ensure_unit(&self) -> Result<()> {
        if self.is_unit(UNIT_TOLERANCE) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "quaternion norm {} deviates from 1 by more than {UNIT_TOLERANCE}",
                self.norm()
            )))
        }
    }

    /// Rotation matrix of a unit quaternion (not re-checked).
    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let Quaternion { w, x, y, z } = *self;
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Rotates `v` assuming unit norm; see [`quat_rotate`] for the checked form.
    pub fn rotate_unchecked(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let u = Vector3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    /// Rotation vector (log map), angle in [0, π].
    pub fn to_rotation_vector(&self) -> Vector3<f64> {
        let q = if self.w < 0.0 { -*self } else { *self };
        let v = Vector3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-12 {
            return 2.0 * v;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, r: Quaternion) -> Quaternion {
        let l = self;
        Quaternion::raw(
            l.w * r.w - l.x * r.x - l.y * r.y - l.z * r.z,
            l.w * r.x + l.x * r.w + l.y * r.z - l.z * r.y,
            l.w * r.y - l.x * r.z + l.y * r.w + l.z * r.x,
            l.w * r.z + l.x * r.y - l.y * r.x + l.z * r.w,
        )
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        Quaternion::raw(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Angle in radians of the rotation taking `a` to `b`, in `[0, π]`.
///
/// Uses `|<a, b>|`, so `q` and `-q` are the same rotation.
pub fn quat_angular_distance(a: &Quaternion, b: &Quaternion) -> Result<f64> {
    a.ensure_unit()?;
    b.ensure_unit()?;
    let d = (a.dot(b).abs() / (a.norm() * b.norm())).min(1.0);
    Ok(2.0 * d.acos())
}

pub fn quat_rotate(q: &Quaternion, v: &Vector3<f64>) -> Result<Vector3<f64>> {
    q.ensure_unit()?;
    Ok(q.rotate_unchecked(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rz90() -> Quaternion {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Quaternion::raw(h, 0.0, 0.0, h)
    }

    #[test]
    fn angular_distance_examples() {
        let id = Quaternion::identity();
        assert_eq!(quat_angular_distance(&id, &id).unwrap(), 0.0);
        let d = quat_angular_distance(&id, &rz90()).unwrap();
        assert!((d - FRAC_PI_2).abs() < 1e-12);
        let q = Quaternion::new(0.3, -0.2, 0.5, 0.7).unwrap();
        assert!(quat_angular_distance(&q, &-q).unwrap() < 1e-7);
    }

    #[test]
    fn angular_distance_rejects_non_unit() {
        let bad = Quaternion::raw(1.0, 0.1, 0.0, 0.0);
        let err = quat_angular_distance(&bad, &Quaternion::IDENTITY).unwrap_err();
        assert_eq!(err.kind(), "invalid-argument");
        assert!(quat_rotate(&bad, &Vector3::x()).is_err());
    }

    #[test]
    fn rotate_examples() {
        let v = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(quat_rotate(&Quaternion::IDENTITY, &v).unwrap(), v);
        let r = quat_rotate(&rz90(), &Vector3::x()).unwrap();
        assert!((r - Vector3::y()).norm() < 1e-15);
        let rx90 = Quaternion::from_axis_angle(&Vector3::x(), FRAC_PI_2);
        let r = quat_rotate(&rx90, &Vector3::y()).unwrap();
        assert!((r - Vector3::z()).norm() < 1e-15);
    }

    #[test]
    fn matrix_round_trip() {
        let q = Quaternion::new(0.1, 0.9, -0.3, 0.2).unwrap();
        let m = q.to_rotation_matrix();
        let v = Vector3::new(0.3, -1.2, 2.0);
        assert!((m * v - q.rotate_unchecked(&v)).norm() < 1e-14);
        let back = Quaternion::from_rotation_matrix(&m);
        assert!(quat_angular_distance(&q, &back).unwrap() < 1e-7);
    }

    fn unit_quat() -> impl Strategy<Value = Quaternion> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z).unwrap())
    }

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn angular_distance_is_pseudometric(a in unit_quat(), b in unit_quat(), c in unit_quat()) {
            let ab = quat_angular_distance(&a, &b).unwrap();
            let ba = quat_angular_distance(&b, &a).unwrap();
            let bc = quat_angular_distance(&b, &c).unwrap();
            let ac = quat_angular_distance(&a, &c).unwrap();
            prop_assert!((0.0..=PI).contains(&ab));
            prop_assert_eq!(ab, ba);
            prop_assert!(quat_angular_distance(&a, &a).unwrap() < 1e-7);
            prop_assert!(ac <= ab + bc + 1e-7);
        }

        #[test]
        fn rotation_preserves_dot_products(q in unit_quat(), u in vec3(), v in vec3()) {
            let ru = quat_rotate(&q, &u).unwrap();
            let rv = quat_rotate(&q, &v).unwrap();
            let scale = u.norm() * v.norm() + 1e-300;
            prop_assert!((ru.dot(&rv) - u.dot(&v)).abs() <= 1e-9 * scale.max(1.0));
            prop_assert!((ru.norm() - u.norm()).abs() <= 1e-12 * u.norm().max(1.0));
        }

        #[test]
        fn rotation_vector_round_trip(q in unit_quat()) {
            let back = Quaternion::from_rotation_vector(&q.to_rotation_vector());
            prop_assert!(quat_angular_distance(&q, &back).unwrap() < 1e-6);
        }
    }
}
