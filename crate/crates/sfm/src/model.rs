use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Vector2, Vector3};
use roomscan_core::{project, CameraIntrinsics, Error, Pose, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub frame_id: u64,
    pub feature_index: usize,
    /// Measured pixel of the feature.
    pub pixel: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub point_id: u64,
    pub observations: Vec<Observation>,
}

/// Frames that pin the similarity ambiguity during bundle adjustment: all
/// of `fixed`, and the largest translation coordinate of `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gauge {
    pub fixed: u64,
    pub scale: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseModel {
    pub intrinsics: CameraIntrinsics,
    pub poses: BTreeMap<u64, Pose>,
    pub points: BTreeMap<u64, Vector3<f64>>,
    pub tracks: Vec<Track>,
    pub gauge: Gauge,
}

impl SparseModel {
    /// Checks the structural invariants: observations reference posed
    /// frames, each point has ≥ 2 observations from distinct frames and lies
    /// in front of every observing camera.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !self.poses.contains_key(&self.gauge.fixed) || !self.poses.contains_key(&self.gauge.scale) {
            return bad("gauge frames must have poses".into());
        }
        if self.gauge.fixed == self.gauge.scale {
            return bad("gauge frames must differ".into());
        }
        let mut seen = BTreeSet::new();
        for track in &self.tracks {
            let Some(x) = self.points.get(&track.point_id) else {
                return bad(format!("track references missing point {}", track.point_id));
            };
            if !seen.insert(track.point_id) {
                return bad(format!("point {} has two tracks", track.point_id));
            }
            if track.observations.len() < 2 {
                return bad(format!("point {} has fewer than two observations", track.point_id));
            }
            let mut frames = BTreeSet::new();
            for o in &track.observations {
                let Some(pose) = self.poses.get(&o.frame_id) else {
                    return bad(format!("observation references unposed frame {}", o.frame_id));
                };
                if !frames.insert(o.frame_id) {
                    return bad(format!("point {} observed twice in frame {}", track.point_id, o.frame_id));
                }
                if !(pose.transform(x).z > 0.0) {
                    return bad(format!("point {} is behind frame {}", track.point_id, o.frame_id));
                }
            }
        }
        if seen.len() != self.points.len() {
            return bad("every point needs a track".into());
        }
        Ok(())
    }

    pub fn observation_count(&self) -> usize {
        self.tracks.iter().map(|t| t.observations.len()).sum()
    }

    /// Reprojection residuals in pixels, one per observation.
    pub fn residuals(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.observation_count());
        for t in &self.tracks {
            let x = &self.points[&t.point_id];
            for o in &t.observations {
                let r = match project(&self.poses[&o.frame_id], &self.intrinsics, x) {
                    Some(p) => (p - o.pixel).norm(),
                    None => f64::INFINITY,
                };
                out.push(r);
            }
        }
        out
    }

    pub fn reprojection_rmse(&self) -> f64 {
        let r = self.residuals();
        if r.is_empty() {
            return 0.0;
        }
        (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt()
    }
}
