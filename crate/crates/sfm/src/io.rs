use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use roomscan_core::{Error, Pose, Result};
use serde::{Deserialize, Serialize};

use crate::model::SparseModel;

pub const PLY_FILE: &str = "points.ply";
pub const POSES_FILE: &str = "poses.json";
pub const MODEL_FILE: &str = "model.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub quat: [f64; 4],
    pub t: [f64; 3],
}

impl From<&Pose> for PoseRecord {
    fn from(p: &Pose) -> Self {
        Self { quat: p.rotation.to_array(), t: [p.translation.x, p.translation.y, p.translation.z] }
    }
}

/// `{frame_id: {"quat": [w,x,y,z], "t": [x,y,z]}}`
pub fn poses_to_json(model: &SparseModel) -> String {
    let map: BTreeMap<String, PoseRecord> = model.poses.iter().map(|(id, p)| (id.to_string(), p.into())).collect();
    serde_json::to_string_pretty(&map).expect("poses serialize")
}

pub fn poses_from_json(s: &str) -> Result<BTreeMap<u64, Pose>> {
    let map: BTreeMap<String, PoseRecord> =
        serde_json::from_str(s).map_err(|e| Error::Malformed(format!("poses: {e}")))?;
    map.into_iter()
        .map(|(k, r)| {
            let id = k.parse::<u64>().map_err(|_| Error::Malformed(format!("frame id {k:?}")))?;
            let q = roomscan_core::Quaternion::from_array(r.quat).map_err(|e| Error::Malformed(e.to_string()))?;
            Ok((id, Pose { rotation: q, translation: r.t.into() }))
        })
        .collect()
}

/// ASCII PLY with one vertex per point and its gray level (128 if unknown).
pub fn ply_string(model: &SparseModel, gray: &BTreeMap<u64, u8>) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", model.points.len());
    s.push_str("property float x\nproperty float y\nproperty float z\nproperty uchar gray\nend_header\n");
    for (id, x) in &model.points {
        let g = gray.get(id).copied().unwrap_or(128);
        let _ = writeln!(s, "{:.6} {:.6} {:.6} {}", x.x, x.y, x.z, g);
    }
    s
}

pub fn model_to_json(model: &SparseModel) -> String {
    serde_json::to_string_pretty(model).expect("model serializes")
}

pub fn model_from_json(s: &str) -> Result<SparseModel> {
    let m: SparseModel = serde_json::from_str(s).map_err(|e| Error::Malformed(format!("model: {e}")))?;
    m.validate().map_err(|e| Error::Malformed(e.to_string()))?;
    Ok(m)
}

/// Writes `points.ply`, `poses.json` and `model.json` into `dir`.
pub fn write_reconstruction(dir: &Path, model: &SparseModel, gray: &BTreeMap<u64, u8>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(PLY_FILE), ply_string(model, gray))?;
    std::fs::write(dir.join(POSES_FILE), poses_to_json(model) + "\n")?;
    std::fs::write(dir.join(MODEL_FILE), model_to_json(model) + "\n")?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<SparseModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}
