use roomscan_core::{Error, GrayImage, ImuSample, Result, GRAVITY};

use crate::config::ReduceConfig;

/// Mean luminance within `[lum_mean_lo, lum_mean_hi]` and at most
/// `sat_frac_max` of the pixels clipped to 0 or 255.
pub fn exposure_ok(img: &GrayImage, cfg: &ReduceConfig) -> Result<bool> {
    let px = img.pixels();
    if px.is_empty() {
        return Err(Error::InvalidArgument("empty image".into()));
    }
    let mean = img.mean();
    let clipped = px.iter().filter(|&&p| p == 0 || p == 255).count();
    let frac = clipped as f64 / px.len() as f64;
    Ok(mean >= cfg.lum_mean_lo && mean <= cfg.lum_mean_hi && frac <= cfg.sat_frac_max)
}

/// Accelerometer-based blur predictor: the specific-force magnitude must stay
/// near gravity and, given the previous capture's sample, the change of
/// acceleration per second must stay below `jerk_max`.
pub fn motion_gate(imu: &ImuSample, prev: Option<&ImuSample>, cfg: &ReduceConfig) -> Result<bool> {
    let deviation = (imu.accel.norm() - GRAVITY).abs();
    let jerk_ok = match prev {
        None => true,
        Some(p) => {
            if imu.t_us <= p.t_us {
                return Err(Error::InvalidArgument(format!(
                    "previous sample at {} us is not before {} us",
                    p.t_us, imu.t_us
                )));
            }
            let dt = (imu.t_us - p.t_us) as f64 * 1e-6;
            (imu.accel - p.accel).norm() / dt <= cfg.jerk_max
        }
    };
    Ok(deviation <= cfg.accel_dev_max && jerk_ok)
}
