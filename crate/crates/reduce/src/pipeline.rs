use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use roomscan_core::{CaptureStream, Frame, Result};

use crate::anisotropy::anisotropy;
use crate::config::ReduceConfig;
use crate::dedup::{coverage_prune, temporal_dedup, Candidate};
use crate::gates::{exposure_ok, motion_gate};

/// Frames dropped by each stage, in pipeline order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DroppedCounts {
    pub exposure: usize,
    pub motion: usize,
    pub anisotropy: usize,
    pub temporal_dedup: usize,
    pub coverage: usize,
}

impl DroppedCounts {
    pub fn sum(&self) -> usize {
        self.exposure + self.motion + self.anisotropy + self.temporal_dedup + self.coverage
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionReport {
    pub total: usize,
    pub kept_ids: Vec<u64>,
    pub dropped: DroppedCounts,
    pub reduction_ratio: f64,
}

impl ReductionReport {
    fn new(total: usize, kept_ids: Vec<u64>, dropped: DroppedCounts) -> Self {
        let reduction_ratio = if total == 0 { 0.0 } else { 1.0 - kept_ids.len() as f64 / total as f64 };
        Self { total, kept_ids, dropped, reduction_ratio }
    }
}

/// Linear-interpolation percentile of unsorted `values` (`pct` in `[0, 100]`).
pub fn percentile(values: &[f64], pct: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = pct.clamp(0.0, 100.0) / 100.0 * (v.len() - 1) as f64;
    let (lo, hi) = (rank.floor() as usize, rank.ceil() as usize);
    Some(v[lo] + (rank - lo as f64) * (v[hi] - v[lo]))
}

/// Runs exposure → motion → anisotropy percentile → temporal dedup →
/// coverage pruning and returns the surviving frames with per-stage counts.
///
/// The motion gate compares a frame's accelerometer sample with the
/// preceding capture only when that capture (id − 1) is present in the stream.
/// Anisotropy scores are computed in parallel and merged by position, so
/// the result does not depend on the thread count.
pub fn reduce_stream(stream: &CaptureStream, cfg: &ReduceConfig) -> Result<(Vec<Frame>, ReductionReport)> {
    cfg.validate()?;
    let frames = &stream.frames;
    let total = frames.len();
    let mut dropped = DroppedCounts::default();

    let mut alive: Vec<usize> = Vec::with_capacity(total);
    for (i, f) in frames.iter().enumerate() {
        if exposure_ok(&f.image, cfg)? {
            alive.push(i);
        }
    }
    dropped.exposure = total - alive.len();

    let before = alive.len();
    let mut moving_ok = Vec::with_capacity(before);
    for &i in &alive {
        let prev = (i > 0 && frames[i - 1].id + 1 == frames[i].id).then(|| &frames[i - 1].imu);
        if motion_gate(&frames[i].imu, prev, cfg)? {
            moving_ok.push(i);
        }
    }
    dropped.motion = before - moving_ok.len();
    alive = moving_ok;

    let scores: Vec<f64> = alive.par_iter().map(|&i| anisotropy(&frames[i].image, cfg)).collect::<Result<Vec<_>>>()?;
    let mut scored: Vec<(usize, f64)> = alive.iter().copied().zip(scores.iter().copied()).collect();
    if let Some(threshold) = percentile(&scores, cfg.aniso_keep_percentile) {
        let before = scored.len();
        scored.retain(|&(_, s)| s >= threshold);
        dropped.anisotropy = before - scored.len();
    }

    let candidates: Vec<Candidate> = scored.iter().map(|&(i, s)| Candidate::from_frame(&frames[i], s)).collect();
    let dedup_ids = temporal_dedup(&candidates, cfg)?;
    dropped.temporal_dedup = candidates.len() - dedup_ids.len();
    let survivors: Vec<Candidate> = candidates.into_iter().filter(|c| dedup_ids.binary_search(&c.id).is_ok()).collect();

    let kept_ids = coverage_prune(&survivors, cfg);
    dropped.coverage = survivors.len() - kept_ids.len();

    let kept: Vec<Frame> = frames.iter().filter(|f| kept_ids.binary_search(&f.id).is_ok()).cloned().collect();
    Ok((kept, ReductionReport::new(total, kept_ids, dropped)))
}
