//! Command-line orchestration of the capture → reduce → reconstruct →
//! evaluate pipeline.
//!
//! Every failure maps onto [`CliError`], which carries the process exit code
//! and a stable error kind:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 2    | bad config, missing or malformed input    |
//! | 3    | output could not be written               |
//! | 4    | a pipeline stage failed                   |

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use roomscan_capsim::io::{read_ground_truth, write_simulation, GROUND_TRUTH_FILE};
use roomscan_capsim::{default_intrinsics, simulate, RoomScene, TrajectoryConfig};
use roomscan_core::pgm::read_capture_dir;
use roomscan_core::{CameraIntrinsics, CaptureStream, Error};
use roomscan_eval::{evaluate_model, AlignedError};
use roomscan_reduce::io::write_reduction;
use roomscan_reduce::{reduce_stream, DroppedCounts, ReduceConfig};
use roomscan_sfm::io::{read_model, write_reconstruction, MODEL_FILE, PLY_FILE};
use roomscan_sfm::{reconstruct, ReconstructOptions};

pub const REPORT_FILE: &str = "report.json";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const CAPTURE_DIR: &str = "capture";
pub const REDUCED_DIR: &str = "reduced";
pub const MODEL_DIR: &str = "model";

/// Everything a run needs, as one JSON document. Bundle-adjustment options
/// live at `sfm.ba`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub scene: RoomScene,
    pub trajectory: TrajectoryConfig,
    pub camera: CameraIntrinsics,
    pub reduce: ReduceConfig,
    pub sfm: ReconstructOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: None,
            scene: RoomScene::default(),
            trajectory: TrajectoryConfig::default(),
            camera: default_intrinsics(),
            reduce: ReduceConfig::default(),
            sfm: ReconstructOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.scene.validate().map_err(CliError::config)?;
        self.trajectory.validate().map_err(CliError::config)?;
        self.camera.validate().map_err(CliError::config)?;
        self.reduce.validate().map_err(CliError::config)?;
        self.sfm.validate().map_err(CliError::config)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::new(2, "malformed-input", format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::new(2, "malformed-input", format!("{}: {e}", p.display())))?;
                Self::from_json(&text)
            }
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self { code, kind: kind.into(), message: message.into() }
    }

    fn config(e: Error) -> Self {
        Self::new(2, e.kind(), format!("config: {e}"))
    }

    fn input(e: Error) -> Self {
        Self::new(2, e.kind(), e.to_string())
    }

    fn output(e: Error) -> Self {
        Self::new(3, "io", e.to_string())
    }

    fn stage(stage: &str, e: Error) -> Self {
        Self::new(4, e.kind(), format!("{stage}: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.message.replace('\n', " ");
        write!(f, "error[{}]: {}", self.kind, msg)
    }
}

impl std::error::Error for CliError {}

fn write_json(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::output(e.into()))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::new(3, "io", format!("{}: {e}", dir.display())))
}

fn read_input_stream(dir: &Path) -> Result<CaptureStream, CliError> {
    let stream = read_capture_dir(dir).map_err(CliError::input)?;
    if stream.frames.is_empty() {
        return Err(CliError::new(2, "insufficient-data", format!("{} holds no frames", dir.display())));
    }
    Ok(stream)
}

/// Writes frames, sensor log and ground truth; returns the frame count.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<usize, CliError> {
    ensure_dir(out)?;
    let (stream, gt) =
        simulate(&cfg.scene, &cfg.trajectory, &cfg.camera, cfg.seed).map_err(|e| CliError::stage("simulate", e))?;
    write_simulation(out, &stream, &gt).map_err(CliError::output)?;
    Ok(stream.frames.len())
}

pub fn cmd_reduce(input: &Path, cfg: &RunConfig, out: &Path) -> Result<roomscan_reduce::ReductionReport, CliError> {
    let stream = read_input_stream(input)?;
    ensure_dir(out)?;
    let (kept, report) = reduce_stream(&stream, &cfg.reduce).map_err(|e| CliError::stage("reduce", e))?;
    write_reduction(out, &stream, &kept, &report).map_err(CliError::output)?;
    Ok(report)
}

pub fn cmd_reconstruct(input: &Path, cfg: &RunConfig, out: &Path) -> Result<roomscan_sfm::Reconstruction, CliError> {
    let stream = read_input_stream(input)?;
    ensure_dir(out)?;
    let rec =
        reconstruct(&stream.frames, &stream.intrinsics, &cfg.sfm).map_err(|e| CliError::stage("reconstruct", e))?;
    write_reconstruction(out, &rec.model, &rec.point_gray).map_err(CliError::output)?;
    Ok(rec)
}

pub fn cmd_evaluate(model: &Path, gt: &Path) -> Result<AlignedError, CliError> {
    let model = read_model(model).map_err(CliError::input)?;
    let gt = read_ground_truth(gt).map_err(CliError::input)?;
    evaluate_model(&model, &gt).map_err(|e| CliError::stage("evaluate", e))
}

/// Seconds spent in each pipeline stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub simulate: f64,
    pub reduce: f64,
    pub reconstruct: f64,
    pub evaluate: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub frames_total: usize,
    pub frames_kept: usize,
    pub reduction_ratio: f64,
    pub dropped: DroppedCounts,
    pub kept_ids: Vec<u64>,
    pub frames_registered: usize,
    /// Kept frames the reconstruction could not register.
    pub skipped: Vec<u64>,
    pub points: usize,
    pub median_rel_err: f64,
    pub mean_point_err_m: f64,
    pub matched_points: usize,
    pub max_pose_rot_err_deg: f64,
    pub reproj_rmse_px: f64,
    pub wall_time_s: StageTimes,
}

impl PipelineReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Simulates, reduces, reconstructs and evaluates, writing every stage's
/// output under `out` and the summary to `out/report.json`.
pub fn cmd_pipeline(cfg: &RunConfig, out: &Path) -> Result<PipelineReport, CliError> {
    let start = Instant::now();
    let mut times = StageTimes::default();
    ensure_dir(out)?;

    let t = Instant::now();
    let (stream, gt) =
        simulate(&cfg.scene, &cfg.trajectory, &cfg.camera, cfg.seed).map_err(|e| CliError::stage("simulate", e))?;
    times.simulate = t.elapsed().as_secs_f64();
    write_simulation(&out.join(CAPTURE_DIR), &stream, &gt).map_err(CliError::output)?;
    log::info!("simulated {} frames in {:.1} s", stream.frames.len(), times.simulate);

    let t = Instant::now();
    let (kept, reduction) = reduce_stream(&stream, &cfg.reduce).map_err(|e| CliError::stage("reduce", e))?;
    times.reduce = t.elapsed().as_secs_f64();
    write_reduction(&out.join(REDUCED_DIR), &stream, &kept, &reduction).map_err(CliError::output)?;
    log::info!("kept {} of {} frames in {:.1} s", kept.len(), stream.frames.len(), times.reduce);

    let t = Instant::now();
    let rec = reconstruct(&kept, &stream.intrinsics, &cfg.sfm).map_err(|e| CliError::stage("reconstruct", e))?;
    times.reconstruct = t.elapsed().as_secs_f64();
    let model_dir = out.join(MODEL_DIR);
    ensure_dir(&model_dir)?;
    write_reconstruction(&model_dir, &rec.model, &rec.point_gray).map_err(CliError::output)?;
    log::info!("registered {} frames in {:.1} s", rec.model.poses.len(), times.reconstruct);

    let t = Instant::now();
    let err = evaluate_model(&rec.model, &gt).map_err(|e| CliError::stage("evaluate", e))?;
    times.evaluate = t.elapsed().as_secs_f64();
    write_json(&model_dir.join(EVALUATION_FILE), &evaluation_json(&err))?;
    times.total = start.elapsed().as_secs_f64();

    let report = PipelineReport {
        seed: cfg.seed,
        frames_total: reduction.total,
        frames_kept: kept.len(),
        reduction_ratio: reduction.reduction_ratio,
        dropped: reduction.dropped,
        kept_ids: reduction.kept_ids,
        frames_registered: rec.model.poses.len(),
        skipped: rec.skipped,
        points: rec.model.points.len(),
        median_rel_err: err.median_rel_err,
        mean_point_err_m: err.mean_point_err_m,
        matched_points: err.matched_points,
        max_pose_rot_err_deg: err.pose_rot_err_deg.values().copied().fold(0.0, f64::max),
        reproj_rmse_px: err.reproj_rmse_px,
        wall_time_s: times,
    };
    write_json(&out.join(REPORT_FILE), &report.to_json())?;
    Ok(report)
}

pub fn evaluation_json(err: &AlignedError) -> String {
    let mut s = serde_json::to_string_pretty(err).expect("evaluation serializes");
    s.push('\n');
    s
}

/// Paths the pipeline writes, relative to its output directory.
pub fn pipeline_outputs() -> BTreeMap<&'static str, PathBuf> {
    BTreeMap::from([
        ("report", PathBuf::from(REPORT_FILE)),
        ("capture", PathBuf::from(CAPTURE_DIR)),
        ("ground_truth", Path::new(CAPTURE_DIR).join(GROUND_TRUTH_FILE)),
        ("reduced", PathBuf::from(REDUCED_DIR)),
        ("model", Path::new(MODEL_DIR).join(MODEL_FILE)),
        ("ply", Path::new(MODEL_DIR).join(PLY_FILE)),
    ])
}
