use serde::{Deserialize, Serialize};

use roomscan_core::{Error, Result};

/// Reduction parameters. Every threshold comparison keeps a frame on equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReduceConfig {
    /// Number of orientations sampled over `[0, π)`.
    pub directions_n: usize,
    /// Half-length of the 1-D analysis window; the window holds `2 * pwd_window + 1` samples.
    pub pwd_window: usize,
    /// Spacing of the anchor-pixel grid.
    pub anchor_stride: usize,
    pub renyi_alpha: f64,
    /// Frames scoring below this percentile of the surviving scores are dropped.
    pub aniso_keep_percentile: f64,
    pub lum_mean_lo: f64,
    pub lum_mean_hi: f64,
    /// Maximum fraction of pixels at 0 or 255.
    pub sat_frac_max: f64,
    /// Maximum | ‖accel‖ − g |, m/s².
    pub accel_dev_max: f64,
    /// Maximum ‖Δaccel‖ / Δt between consecutive captures, m/s³.
    pub jerk_max: f64,
    /// Frames whose ids differ by less than this are temporal neighbors.
    pub dedup_window: usize,
    /// Minimum orientation change, radians, for a neighbor to count as new.
    pub dedup_theta_min: f64,
    pub coverage_bin_deg: f64,
    pub coverage_kmax: usize,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        Self {
            directions_n: 8,
            pwd_window: 8,
            anchor_stride: 4,
            renyi_alpha: 3.0,
            aniso_keep_percentile: 50.0,
            lum_mean_lo: 30.0,
            lum_mean_hi: 225.0,
            sat_frac_max: 0.05,
            accel_dev_max: 2.0,
            jerk_max: 40.0,
            dedup_window: 5,
            dedup_theta_min: 0.1745,
            coverage_bin_deg: 15.0,
            coverage_kmax: 2,
        }
    }
}

impl ReduceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.directions_n == 0 {
            return bad("directions_n must be positive");
        }
        if self.pwd_window == 0 || self.anchor_stride == 0 {
            return bad("pwd_window and anchor_stride must be positive");
        }
        if !(self.renyi_alpha > 0.0) || self.renyi_alpha == 1.0 || !self.renyi_alpha.is_finite() {
            return bad("renyi_alpha must be positive, finite and not 1");
        }
        if !(0.0..=100.0).contains(&self.aniso_keep_percentile) {
            return bad("aniso_keep_percentile must lie in [0, 100]");
        }
        if !(0.0..=255.0).contains(&self.lum_mean_lo)
            || !(0.0..=255.0).contains(&self.lum_mean_hi)
            || self.lum_mean_lo > self.lum_mean_hi
        {
            return bad("luminance bounds must be ordered within [0, 255]");
        }
        if !(0.0..=1.0).contains(&self.sat_frac_max) {
            return bad("sat_frac_max must lie in [0, 1]");
        }
        if !(self.accel_dev_max >= 0.0) || !(self.jerk_max >= 0.0) {
            return bad("motion thresholds must be nonnegative");
        }
        if self.dedup_window < 1 {
            return bad("dedup_window must be at least 1");
        }
        if !(self.dedup_theta_min >= 0.0) {
            return bad("dedup_theta_min must be nonnegative");
        }
        if !(self.coverage_bin_deg > 0.0) || self.coverage_kmax == 0 {
            return bad("coverage bins and kmax must be positive");
        }
        Ok(())
    }
}
