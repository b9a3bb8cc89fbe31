//! Ground-truth JSON and the simulator's on-disk output.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use roomscan_core::pgm::write_capture_dir;
use roomscan_core::{CaptureStream, Error, Pose, Quaternion, Result};

use crate::scene::{Landmark, LandmarkKind};
use crate::simulate::{FrameDegradation, GroundTruth};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRecord {
    id: u64,
    quat: [f64; 4],
    t: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LandmarkRecord {
    id: u64,
    xyz: [f64; 3],
    kind: LandmarkKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DegradationRecord {
    id: u64,
    blurred: bool,
    exposure_gain: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthFile {
    room_diagonal: f64,
    poses: Vec<PoseRecord>,
    landmarks: Vec<LandmarkRecord>,
    #[serde(default)]
    degradations: Vec<DegradationRecord>,
}

pub fn ground_truth_to_json(gt: &GroundTruth) -> String {
    let file = GroundTruthFile {
        room_diagonal: gt.room_diagonal,
        poses: gt
            .poses
            .iter()
            .map(|(&id, p)| PoseRecord { id, quat: p.rotation.to_array(), t: p.translation.into() })
            .collect(),
        landmarks: gt
            .landmarks
            .iter()
            .map(|l| LandmarkRecord { id: l.id, xyz: l.position.into(), kind: l.kind })
            .collect(),
        degradations: gt
            .degradations
            .iter()
            .map(|(&id, d)| DegradationRecord { id, blurred: d.blurred, exposure_gain: d.exposure_gain })
            .collect(),
    };
    let mut s = serde_json::to_string(&file).expect("ground truth serializes");
    s.push('\n');
    s
}

pub fn ground_truth_from_json(text: &str) -> Result<GroundTruth> {
    let file: GroundTruthFile =
        serde_json::from_str(text).map_err(|e| Error::Malformed(format!("ground truth: {e}")))?;
    let mut poses = std::collections::BTreeMap::new();
    for p in file.poses {
        let q = Quaternion::raw(p.quat[0], p.quat[1], p.quat[2], p.quat[3]);
        q.ensure_unit().map_err(|e| Error::Malformed(format!("pose {}: {e}", p.id)))?;
        poses.insert(p.id, Pose { rotation: q.normalized()?, translation: Vector3::from(p.t) });
    }
    Ok(GroundTruth {
        poses,
        landmarks: file
            .landmarks
            .into_iter()
            .map(|l| Landmark { id: l.id, position: Vector3::from(l.xyz), kind: l.kind })
            .collect(),
        room_diagonal: file.room_diagonal,
        degradations: file
            .degradations
            .into_iter()
            .map(|d| (d.id, FrameDegradation { blurred: d.blurred, exposure_gain: d.exposure_gain }))
            .collect(),
    })
}

pub fn write_ground_truth(path: &Path, gt: &GroundTruth) -> Result<()> {
    fs::write(path, ground_truth_to_json(gt))?;
    Ok(())
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(path)?;
    ground_truth_from_json(&text)
}

/// Writes the capture directory plus `ground_truth.json`.
pub fn write_simulation(dir: &Path, stream: &CaptureStream, gt: &GroundTruth) -> Result<()> {
    write_capture_dir(dir, stream)?;
    write_ground_truth(&dir.join(GROUND_TRUTH_FILE), gt)
}
