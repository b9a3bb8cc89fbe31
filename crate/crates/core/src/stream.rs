use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CameraIntrinsics;
use crate::image::GrayImage;
use crate::quat::Quaternion;

/// Maximum |Δt| between a frame and the IMU sample attached to it.
pub const IMU_MATCH_WINDOW_US: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Microseconds since stream start.
    pub t_us: u64,
    /// Device-to-world attitude.
    pub orient: Quaternion,
    /// Specific force in the device frame (includes gravity), m/s².
    pub accel: Vector3<f64>,
    pub lux: Option<f64>,
}

impl ImuSample {
    pub fn new(t_us: u64, orient: Quaternion, accel: Vector3<f64>, lux: Option<f64>) -> Result<Self> {
        orient.ensure_unit()?;
        if let Some(l) = lux {
            if !(l >= 0.0) {
                return Err(Error::invalid("lux must be nonnegative"));
            }
        }
        Ok(Self { t_us, orient, accel, lux })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: u64,
    pub t_us: u64,
    pub image: GrayImage,
    pub imu: ImuSample,
}

impl Frame {
    pub fn new(id: u64, t_us: u64, image: GrayImage, imu: ImuSample) -> Result<Self> {
        if imu.t_us.abs_diff(t_us) > IMU_MATCH_WINDOW_US {
            return Err(Error::invalid(format!(
                "frame {id}: IMU sample at {} us is more than {IMU_MATCH_WINDOW_US} us from image at {t_us} us",
                imu.t_us
            )));
        }
        Ok(Self { id, t_us, image, imu })
    }
}

/// Picks the sample nearest in time to `t_us`, if one lies within
/// [`IMU_MATCH_WINDOW_US`]. Ties resolve to the earlier sample.
pub fn nearest_imu_sample(t_us: u64, samples: &[ImuSample]) -> Option<&ImuSample> {
    samples
        .iter()
        .filter(|s| s.t_us.abs_diff(t_us) <= IMU_MATCH_WINDOW_US)
        .min_by_key(|s| (s.t_us.abs_diff(t_us), s.t_us))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureStream {
    pub intrinsics: CameraIntrinsics,
    pub frames: Vec<Frame>,
}

impl CaptureStream {
    pub fn new(intrinsics: CameraIntrinsics, frames: Vec<Frame>) -> Result<Self> {
        intrinsics.validate()?;
        for pair in frames.windows(2) {
            if pair[1].t_us <= pair[0].t_us || pair[1].id <= pair[0].id {
                return Err(Error::invalid(format!(
                    "frames {} and {} are not strictly ordered",
                    pair[0].id, pair[1].id
                )));
            }
        }
        for f in &frames {
            if f.image.width() != intrinsics.width || f.image.height() != intrinsics.height {
                return Err(Error::invalid(format!("frame {} size differs from intrinsics", f.id)));
            }
        }
        Ok(Self { intrinsics, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// One line of the JSON-lines sensor log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorRecord {
    pub id: u64,
    pub t_us: u64,
    pub quat: [f64; 4],
    pub accel: [f64; 3],
    pub lux: Option<f64>,
}

impl SensorRecord {
    pub fn from_frame(f: &Frame) -> Self {
        Self {
            id: f.id,
            t_us: f.imu.t_us,
            quat: f.imu.orient.to_array(),
            accel: [f.imu.accel.x, f.imu.accel.y, f.imu.accel.z],
            lux: f.imu.lux,
        }
    }

    /// Sample with the stored quaternion re-normalized; text round trips
    /// can leave it a few ulps off unit length.
    pub fn to_sample(&self) -> Result<ImuSample> {
        let q = Quaternion::raw(self.quat[0], self.quat[1], self.quat[2], self.quat[3]);
        q.ensure_unit()?;
        ImuSample::new(self.t_us, q.normalized()?, Vector3::from(self.accel), self.lux)
    }
}
