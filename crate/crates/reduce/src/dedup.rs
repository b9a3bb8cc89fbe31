use std::cmp::Ordering;
use std::collections::BTreeMap;

use roomscan_core::{quat_angular_distance, Frame, Quaternion, Result, Vector3};

use crate::config::ReduceConfig;

/// A frame reduced to what the geometric stages look at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub id: u64,
    /// Device-to-world attitude.
    pub orient: Quaternion,
    pub score: f64,
}

impl Candidate {
    pub fn from_frame(frame: &Frame, score: f64) -> Self {
        Self { id: frame.id, orient: frame.imu.orient, score }
    }

    /// Optical axis in world coordinates (camera +z).
    pub fn viewing_direction(&self) -> Vector3<f64> {
        self.orient.rotate_unchecked(&Vector3::z())
    }
}

/// Higher score first, then lower id.
fn priority(a: &Candidate, b: &Candidate) -> Ordering {
    b.score.total_cmp(&a.score).then(a.id.cmp(&b.id))
}

/// Drops frames that repeat the orientation of a better temporal neighbor.
///
/// Frames are visited best-first. A frame is kept unless some already kept
/// frame whose id differs by less than `dedup_window` lies within
/// `dedup_theta_min` of it. Keep decisions only consult kept frames, so
/// running the stage again on its output keeps everything.
pub fn temporal_dedup(frames: &[Candidate], cfg: &ReduceConfig) -> Result<Vec<u64>> {
    let mut order: Vec<&Candidate> = frames.iter().collect();
    order.sort_by(|a, b| priority(a, b));
    let window = cfg.dedup_window as u64;
    let mut kept: Vec<&Candidate> = Vec::new();
    for f in order {
        let mut redundant = false;
        for k in &kept {
            if k.id.abs_diff(f.id) < window && quat_angular_distance(&k.orient, &f.orient)? < cfg.dedup_theta_min {
                redundant = true;
                break;
            }
        }
        if !redundant {
            kept.push(f);
        }
    }
    let mut ids: Vec<u64> = kept.iter().map(|c| c.id).collect();
    ids.sort_unstable();
    Ok(ids)
}

/// Heading/elevation cell of a viewing direction, `bin_deg` degrees per side.
pub fn coverage_bin(dir: &Vector3<f64>, bin_deg: f64) -> (i64, i64) {
    let yaw = dir.y.atan2(dir.x).to_degrees();
    let pitch = (dir.z / dir.norm()).clamp(-1.0, 1.0).asin().to_degrees();
    ((yaw / bin_deg).floor() as i64, (pitch / bin_deg).floor() as i64)
}

/// Keeps the `coverage_kmax` best frames of every occupied viewing-direction cell.
pub fn coverage_prune(frames: &[Candidate], cfg: &ReduceConfig) -> Vec<u64> {
    let mut bins: BTreeMap<(i64, i64), Vec<&Candidate>> = BTreeMap::new();
    for f in frames {
        bins.entry(coverage_bin(&f.viewing_direction(), cfg.coverage_bin_deg)).or_default().push(f);
    }
    let mut ids: Vec<u64> = bins
        .into_values()
        .flat_map(|mut members| {
            members.sort_by(|a, b| priority(a, b));
            members.into_iter().take(cfg.coverage_kmax).map(|c| c.id)
        })
        .collect();
    ids.sort_unstable();
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn yawed(id: u64, deg: f64, score: f64) -> Candidate {
        Candidate { id, orient: Quaternion::from_axis_angle(&Vector3::z(), deg.to_radians()), score }
    }

    #[test]
    fn identical_orientations_keep_best() {
        let frames: Vec<_> = (0..5).map(|i| yawed(i, 0.0, (i + 1) as f64)).collect();
        assert_eq!(temporal_dedup(&frames, &ReduceConfig::default()).unwrap(), vec![4]);
    }

    #[test]
    fn distinct_orientations_keep_all() {
        let frames: Vec<_> = (0..5).map(|i| yawed(i, 30.0 * i as f64, 1.0)).collect();
        let cfg = ReduceConfig { dedup_theta_min: 10f64.to_radians(), ..ReduceConfig::default() };
        assert_eq!(temporal_dedup(&frames, &cfg).unwrap(), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn ties_prefer_lower_id() {
        let frames: Vec<_> = (0..3).map(|i| yawed(i, 0.0, 1.0)).collect();
        assert_eq!(temporal_dedup(&frames, &ReduceConfig::default()).unwrap(), vec![0]);
    }

    #[test]
    fn distant_ids_are_not_neighbors() {
        let frames = vec![yawed(0, 0.0, 2.0), yawed(10, 0.0, 1.0)];
        assert_eq!(temporal_dedup(&frames, &ReduceConfig::default()).unwrap(), vec![0, 10]);
    }

    #[test]
    fn threshold_is_inclusive() {
        let theta = 0.2;
        let frames = vec![
            Candidate { id: 0, orient: Quaternion::IDENTITY, score: 2.0 },
            Candidate { id: 1, orient: Quaternion::from_axis_angle(&Vector3::x(), theta), score: 1.0 },
        ];
        let d = quat_angular_distance(&frames[0].orient, &frames[1].orient).unwrap();
        let cfg = ReduceConfig { dedup_theta_min: d, ..ReduceConfig::default() };
        assert_eq!(temporal_dedup(&frames, &cfg).unwrap(), vec![0, 1]);
    }

    #[test]
    fn coverage_single_bin() {
        // camera +z looks along world +x after this rotation
        let base = Quaternion::from_axis_angle(&Vector3::y(), std::f64::consts::FRAC_PI_2);
        let frames: Vec<_> = (0..6).map(|i| Candidate { id: i, orient: base, score: (i % 3) as f64 }).collect();
        let cfg = ReduceConfig { coverage_kmax: 1, ..ReduceConfig::default() };
        assert_eq!(coverage_prune(&frames, &cfg), vec![2]);
    }

    #[test]
    fn coverage_keeps_every_bin() {
        let base = Quaternion::from_axis_angle(&Vector3::y(), std::f64::consts::FRAC_PI_2);
        let frames: Vec<_> = (0..12)
            .map(|i| {
                let yaw = Quaternion::from_axis_angle(&Vector3::z(), (40.0 * (i % 4) as f64 + 5.0).to_radians());
                Candidate { id: i, orient: yaw * base, score: i as f64 }
            })
            .collect();
        let cfg = ReduceConfig { coverage_kmax: 1, ..ReduceConfig::default() };
        let kept = coverage_prune(&frames, &cfg);
        assert_eq!(kept, vec![8, 9, 10, 11]);
    }
}
