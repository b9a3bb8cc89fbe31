//! Incremental reconstruction from kept frames.
//!
//! Frame pairs close in time or attitude are matched and verified with an
//! essential matrix. Verified matches are chained into tracks, a two-view
//! model is bootstrapped from the best-scoring pair, and the remaining frames
//! are registered one at a time against the triangulated tracks.

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, info};
use nalgebra::{Matrix3, Vector2, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use roomscan_core::{project, quat_angular_distance, CameraIntrinsics, Error, Frame, Pose, Result};
use serde::{Deserialize, Serialize};

use crate::ba::{bundle_adjust, refine_pose, BAOptions};
use crate::features::{detect_features, match_features, Feature};
use crate::linalg::rotation_angle_between;
use crate::model::{Gauge, Observation, SparseModel, Track};
use crate::pnp::{pnp, spread_ratio, PNP_CONDITION_MIN};
use crate::twoview::{estimate_essential, parallax, recover_pose, triangulate_checked, Correspondence, RansacOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructOptions {
    pub max_features: usize,
    pub match_ratio: f64,
    /// Frames at most this many positions apart in the input are always paired.
    pub pair_temporal_window: usize,
    /// Other pairs need IMU attitudes within this angle.
    pub pair_max_angle_deg: f64,
    pub min_pair_inliers: usize,
    pub ransac: RansacOptions,
    pub ba: BAOptions,
    pub ba_every: usize,
    pub max_reproj_px: f64,
    pub min_triangulation_deg: f64,
    pub min_registration_points: usize,
    /// Reject bootstrap pairs whose relative rotation disagrees with the
    /// IMU attitudes by more than this; `None` disables the check.
    pub imu_rotation_check_deg: Option<f64>,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            max_features: 500,
            match_ratio: 0.8,
            pair_temporal_window: 2,
            pair_max_angle_deg: 60.0,
            min_pair_inliers: 15,
            ransac: RansacOptions::default(),
            ba: BAOptions::default(),
            ba_every: 3,
            max_reproj_px: 3.0,
            min_triangulation_deg: 1.0,
            min_registration_points: 12,
            imu_rotation_check_deg: Some(5.0),
        }
    }
}

impl ReconstructOptions {
    pub fn validate(&self) -> Result<()> {
        self.ba.validate()?;
        let ok = self.max_features > 0
            && self.match_ratio > 0.0
            && self.match_ratio <= 1.0
            && self.pair_max_angle_deg >= 0.0
            && self.min_pair_inliers >= 8
            && self.ba_every > 0
            && self.max_reproj_px > 0.0
            && self.min_triangulation_deg > 0.0
            && self.min_registration_points >= 6
            && self.ransac.iters > 0
            && self.ransac.sampson_tol > 0.0
            && self.imu_rotation_check_deg.is_none_or(|d| d > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("invalid reconstruction options".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub model: SparseModel,
    /// Input frames that could not be registered, in input order.
    pub skipped: Vec<u64>,
    /// Mean observed luminance per point.
    pub point_gray: BTreeMap<u64, u8>,
}

struct PairMatch {
    i: usize,
    j: usize,
    /// Essential-verified feature index pairs.
    matches: Vec<(usize, usize)>,
    e: Matrix3<f64>,
}

struct TrackState {
    /// (frame index, feature index, usable)
    obs: Vec<(usize, usize, bool)>,
    point: Option<Vector3<f64>>,
}

struct Builder<'a> {
    frames: &'a [Frame],
    k: CameraIntrinsics,
    opts: ReconstructOptions,
    feats: Vec<Vec<Feature>>,
    imu_rot: Vec<Matrix3<f64>>,
    tracks: Vec<TrackState>,
    /// Per frame: (track, observation index).
    frame_tracks: Vec<Vec<(usize, usize)>>,
    poses: Vec<Option<Pose>>,
    gauge: (usize, usize),
}

fn pair_seed(seed: u64, i: usize, j: usize) -> u64 {
    seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl<'a> Builder<'a> {
    fn pixel(&self, f: usize, feat: usize) -> Vector2<f64> {
        let ft = &self.feats[f][feat];
        Vector2::new(ft.x, ft.y)
    }

    fn reproj_error(&self, pose: &Pose, x: &Vector3<f64>, f: usize, feat: usize) -> f64 {
        match project(pose, &self.k, x) {
            Some(p) => (p - self.pixel(f, feat)).norm(),
            None => f64::INFINITY,
        }
    }

    fn build_tracks(&mut self, pairs: &[PairMatch]) {
        let mut offset = Vec::with_capacity(self.feats.len() + 1);
        offset.push(0);
        for f in &self.feats {
            offset.push(offset.last().unwrap() + f.len());
        }
        let total = *offset.last().unwrap();
        let mut parent: Vec<usize> = (0..total).collect();
        let mut used = vec![false; total];
        for p in pairs {
            for &(a, b) in &p.matches {
                let (na, nb) = (offset[p.i] + a, offset[p.j] + b);
                used[na] = true;
                used[nb] = true;
                let (ra, rb) = (find(&mut parent, na), find(&mut parent, nb));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for n in (0..total).filter(|&n| used[n]) {
            let r = find(&mut parent, n);
            groups.entry(r).or_default().push(n);
        }
        for nodes in groups.values() {
            let mut per_frame: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &n in nodes {
                let f = offset.partition_point(|&o| o <= n) - 1;
                per_frame.entry(f).or_default().push(n - offset[f]);
            }
            // a frame seen twice in one track is ambiguous; drop it
            let obs: Vec<(usize, usize, bool)> =
                per_frame.into_iter().filter(|(_, v)| v.len() == 1).map(|(f, v)| (f, v[0], true)).collect();
            if obs.len() >= 2 {
                let t = self.tracks.len();
                for (oi, &(f, _, _)) in obs.iter().enumerate() {
                    self.frame_tracks[f].push((t, oi));
                }
                self.tracks.push(TrackState { obs, point: None });
            }
        }
    }

    /// Triangulates from the widest-baseline pair of registered observations
    /// and disables observations that do not reproject.
    fn triangulate_track(&mut self, t: usize) {
        let min_par = self.opts.min_triangulation_deg.to_radians();
        let reg: Vec<(usize, usize, usize)> = self.tracks[t]
            .obs
            .iter()
            .enumerate()
            .filter(|(_, o)| o.2 && self.poses[o.0].is_some())
            .map(|(oi, o)| (oi, o.0, o.1))
            .collect();
        if reg.len() < 2 {
            return;
        }
        let mut best: Option<(f64, Vector3<f64>)> = None;
        for a in 0..reg.len() {
            for b in a + 1..reg.len() {
                let (pa, pb) = (self.poses[reg[a].1].unwrap(), self.poses[reg[b].1].unwrap());
                let (na, nb) = (
                    self.k.normalize(&self.pixel(reg[a].1, reg[a].2)),
                    self.k.normalize(&self.pixel(reg[b].1, reg[b].2)),
                );
                if let Ok(x) = triangulate_checked(&pa, &pb, &na, &nb, min_par) {
                    let ang = parallax(&pa, &pb, &x);
                    if best.is_none_or(|(bp, _)| ang > bp) {
                        best = Some((ang, x));
                    }
                }
            }
        }
        let Some((_, x)) = best else { return };
        let ok: Vec<(usize, bool)> = reg
            .iter()
            .map(|&(oi, f, feat)| {
                let pose = self.poses[f].unwrap();
                (oi, pose.transform(&x).z > 0.0 && self.reproj_error(&pose, &x, f, feat) <= self.opts.max_reproj_px)
            })
            .collect();
        if ok.iter().filter(|o| o.1).count() < 2 {
            return;
        }
        for (oi, good) in ok {
            if !good {
                self.tracks[t].obs[oi].2 = false;
            }
        }
        self.tracks[t].point = Some(x);
    }

    /// Observations usable for refinement: active, in a registered frame,
    /// of a triangulated point.
    fn live_obs(&self, t: usize) -> Vec<(usize, usize)> {
        self.tracks[t].obs.iter().filter(|o| o.2 && self.poses[o.0].is_some()).map(|o| (o.0, o.1)).collect()
    }

    fn to_model(&self) -> SparseModel {
        let mut poses = BTreeMap::new();
        for (f, p) in self.poses.iter().enumerate() {
            if let Some(p) = p {
                poses.insert(self.frames[f].id, *p);
            }
        }
        let mut points = BTreeMap::new();
        let mut tracks = Vec::new();
        for (t, ts) in self.tracks.iter().enumerate() {
            let Some(x) = ts.point else { continue };
            let obs = self.live_obs(t);
            if obs.len() < 2 {
                continue;
            }
            points.insert(t as u64, x);
            tracks.push(Track {
                point_id: t as u64,
                observations: obs
                    .into_iter()
                    .map(|(f, feat)| Observation {
                        frame_id: self.frames[f].id,
                        feature_index: feat,
                        pixel: self.pixel(f, feat),
                    })
                    .collect(),
            });
        }
        SparseModel {
            intrinsics: self.k,
            poses,
            points,
            tracks,
            gauge: Gauge { fixed: self.frames[self.gauge.0].id, scale: self.frames[self.gauge.1].id },
        }
    }

    /// Disables observations with large residuals or nonpositive depth and
    /// drops points left with fewer than two.
    fn filter(&mut self) {
        for t in 0..self.tracks.len() {
            let Some(x) = self.tracks[t].point else { continue };
            for oi in 0..self.tracks[t].obs.len() {
                let (f, feat, active) = self.tracks[t].obs[oi];
                let Some(pose) = self.poses[f] else { continue };
                if active && self.reproj_error(&pose, &x, f, feat) > self.opts.max_reproj_px {
                    self.tracks[t].obs[oi].2 = false;
                }
            }
            if self.live_obs(t).len() < 2 {
                self.tracks[t].point = None;
            }
        }
    }

    fn bundle(&mut self) -> Result<()> {
        self.filter();
        let model = self.to_model();
        let res = bundle_adjust(&model, &self.opts.ba)?;
        debug!(
            "bundle adjustment: {} cameras, {} points, cost {:.3e} -> {:.3e}",
            model.poses.len(),
            model.points.len(),
            res.cost_trace[0],
            res.cost_trace.last().unwrap()
        );
        let index: BTreeMap<u64, usize> = self.frames.iter().enumerate().map(|(i, f)| (f.id, i)).collect();
        for (id, p) in &res.model.poses {
            self.poses[index[id]] = Some(*p);
        }
        for (id, x) in &res.model.points {
            self.tracks[*id as usize].point = Some(*x);
        }
        self.filter();
        Ok(())
    }

    /// Correspondences of frame `f` with triangulated tracks.
    fn anchors(&self, f: usize) -> Vec<(usize, usize, Vector3<f64>, Vector2<f64>)> {
        self.frame_tracks[f]
            .iter()
            .filter_map(|&(t, oi)| {
                let o = self.tracks[t].obs[oi];
                let x = self.tracks[t].point?;
                o.2.then(|| (t, oi, x, self.pixel(f, o.1)))
            })
            .collect()
    }

    fn count_inliers(&self, pose: &Pose, pts: &[Vector3<f64>], px: &[Vector2<f64>], thr: f64) -> Vec<bool> {
        pts.iter().zip(px).map(|(x, u)| project(pose, &self.k, x).is_some_and(|p| (p - u).norm() <= thr)).collect()
    }

    /// Pose hypothesis from the IMU attitude relative to a registered frame,
    /// with the translation found by two-point RANSAC.
    fn imu_seeded_pose(&self, f: usize, pts: &[Vector3<f64>], px: &[Vector2<f64>]) -> Option<Pose> {
        // registered frame sharing the most tracks
        let mut shared: BTreeMap<usize, usize> = BTreeMap::new();
        for &(t, _) in &self.frame_tracks[f] {
            for o in &self.tracks[t].obs {
                if o.0 != f && self.poses[o.0].is_some() {
                    *shared.entry(o.0).or_default() += 1;
                }
            }
        }
        let (&r, _) = shared.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))?;
        let rr = self.poses[r]?.rotation_matrix();
        let rot = self.imu_rot[f] * self.imu_rot[r].transpose() * rr;

        let norm: Vec<Vector2<f64>> = px.iter().map(|u| self.k.normalize(u)).collect();
        let rows = |i: usize| {
            let rx = rot * pts[i];
            let u = norm[i];
            [(Vector3::new(-1.0, 0.0, u.x), rx.x - u.x * rx.z), (Vector3::new(0.0, -1.0, u.y), rx.y - u.y * rx.z)]
        };
        let solve = |idx: &[usize]| -> Option<Vector3<f64>> {
            let mut ata = Matrix3::zeros();
            let mut atb = Vector3::zeros();
            for &i in idx {
                for (a, b) in rows(i) {
                    ata += a * a.transpose();
                    atb += a * b;
                }
            }
            ata.try_inverse().map(|m| m * atb)
        };
        let thr = 2.0 * self.opts.max_reproj_px;
        let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(self.opts.ransac.seed, f, usize::MAX));
        let mut best: Option<(usize, Vector3<f64>)> = None;
        for _ in 0..200 {
            let s = sample(&mut rng, pts.len(), 2).into_vec();
            let Some(t) = solve(&s) else { continue };
            let pose = Pose::from_matrix(&rot, t);
            let n = self.count_inliers(&pose, pts, px, thr).iter().filter(|&&b| b).count();
            if best.is_none_or(|(bn, _)| n > bn) {
                best = Some((n, t));
            }
        }
        let (_, t) = best?;
        let pose = Pose::from_matrix(&rot, t);
        let mask = self.count_inliers(&pose, pts, px, thr);
        let idx: Vec<usize> = (0..pts.len()).filter(|&i| mask[i]).collect();
        let t = solve(&idx)?;
        Some(Pose::from_matrix(&rot, t))
    }

    fn register(&mut self, f: usize) -> bool {
        let anchors = self.anchors(f);
        let pts: Vec<Vector3<f64>> = anchors.iter().map(|a| a.2).collect();
        let px: Vec<Vector2<f64>> = anchors.iter().map(|a| a.3).collect();
        let thr = self.opts.max_reproj_px;
        let min_n = self.opts.min_registration_points;

        let refine = |this: &Self, pose: Pose| -> (Pose, Vec<bool>) {
            let mut pose = pose;
            let mut mask = this.count_inliers(&pose, &pts, &px, 2.0 * thr);
            for _ in 0..2 {
                let (ip, iu): (Vec<_>, Vec<_>) =
                    pts.iter().zip(&px).zip(&mask).filter(|(_, &m)| m).map(|((x, u), _)| (*x, *u)).unzip();
                if ip.len() < 6 {
                    break;
                }
                pose = refine_pose(&pose, &ip, &iu, &this.k, this.opts.ba.huber_delta_px, 30);
                mask = this.count_inliers(&pose, &pts, &px, thr);
            }
            (pose, mask)
        };
        let count = |m: &[bool]| m.iter().filter(|&&b| b).count();

        let mut best: Option<(Pose, Vec<bool>)> = None;
        if let Some(seed) = self.imu_seeded_pose(f, &pts, &px) {
            best = Some(refine(self, seed));
        }
        if let Some((_, mask)) = &best {
            let (ip, iu): (Vec<_>, Vec<_>) =
                pts.iter().zip(&px).zip(mask).filter(|(_, &m)| m).map(|((x, u), _)| (*x, *u)).unzip();
            if ip.len() >= 6 && spread_ratio(&ip) >= PNP_CONDITION_MIN {
                if let Ok(p) = pnp(&ip, &iu, &self.k) {
                    let cand = refine(self, p);
                    if count(&cand.1) > count(&best.as_ref().unwrap().1) {
                        best = Some(cand);
                    }
                }
            }
        }
        let Some((pose, mask)) = best else { return false };
        let n = count(&mask);
        if n < min_n || (n as f64) < 0.3 * pts.len() as f64 {
            debug!("frame {} rejected: {n}/{} registration inliers", self.frames[f].id, pts.len());
            return false;
        }
        self.poses[f] = Some(pose);
        for (a, ok) in anchors.iter().zip(&mask) {
            if !ok {
                self.tracks[a.0].obs[a.1].2 = false;
            }
        }
        let new: Vec<usize> =
            self.frame_tracks[f].iter().filter(|&&(t, _)| self.tracks[t].point.is_none()).map(|&(t, _)| t).collect();
        for t in new {
            self.triangulate_track(t);
        }
        true
    }
}

/// Reconstructs poses and sparse points of `frames` with intrinsics `k`.
pub fn reconstruct(frames: &[Frame], k: &CameraIntrinsics, opts: &ReconstructOptions) -> Result<Reconstruction> {
    if frames.len() < 2 {
        return Err(Error::InsufficientData(format!("reconstruction needs 2 frames, got {}", frames.len())));
    }
    k.validate()?;
    opts.validate()?;
    let ids: BTreeSet<u64> = frames.iter().map(|f| f.id).collect();
    if ids.len() != frames.len() {
        return Err(Error::InvalidArgument("frame ids must be unique".into()));
    }
    for f in frames {
        if f.image.width() != k.width || f.image.height() != k.height {
            return Err(Error::InvalidArgument(format!("frame {} does not match the intrinsics size", f.id)));
        }
    }

    let feats: Vec<Vec<Feature>> =
        frames.par_iter().map(|f| detect_features(&f.image, opts.max_features)).collect::<Result<_>>()?;
    let imu_rot: Vec<Matrix3<f64>> = frames.iter().map(|f| f.imu.orient.conjugate().to_rotation_matrix()).collect();

    let mut candidates = Vec::new();
    for i in 0..frames.len() {
        for j in i + 1..frames.len() {
            let close = j - i <= opts.pair_temporal_window;
            let angle = quat_angular_distance(&frames[i].imu.orient, &frames[j].imu.orient)?;
            if close || angle <= opts.pair_max_angle_deg.to_radians() {
                candidates.push((i, j));
            }
        }
    }
    let pairs: Vec<PairMatch> = candidates
        .par_iter()
        .filter_map(|&(i, j)| {
            let m = match_features(&feats[i], &feats[j], opts.match_ratio);
            if m.len() < opts.min_pair_inliers {
                debug!("pair {}-{}: {} matches", frames[i].id, frames[j].id, m.len());
                return None;
            }
            let corrs: Vec<Correspondence> = m
                .iter()
                .map(|&(a, b)| {
                    Correspondence::new(
                        Vector2::new(feats[i][a].x, feats[i][a].y),
                        Vector2::new(feats[j][b].x, feats[j][b].y),
                    )
                })
                .collect();
            let ransac = RansacOptions { seed: pair_seed(opts.ransac.seed, i, j), ..opts.ransac };
            let est = estimate_essential(&corrs, k, &ransac).ok()?;
            debug!("pair {}-{}: {} matches, {} inliers", frames[i].id, frames[j].id, m.len(), est.inlier_count());
            let matches: Vec<(usize, usize)> =
                m.iter().zip(&est.inliers).filter(|(_, &ok)| ok).map(|(p, _)| *p).collect();
            (matches.len() >= opts.min_pair_inliers).then_some(PairMatch { i, j, matches, e: est.e })
        })
        .collect();
    info!("{} of {} candidate pairs verified", pairs.len(), candidates.len());

    // bootstrap: most inliers times median parallax, consistent with the IMU
    let scored: Vec<Option<(f64, usize, Pose)>> = pairs
        .par_iter()
        .enumerate()
        .map(|(pi, p)| {
            let corrs: Vec<Correspondence> = p
                .matches
                .iter()
                .map(|&(a, b)| {
                    Correspondence::new(
                        Vector2::new(feats[p.i][a].x, feats[p.i][a].y),
                        Vector2::new(feats[p.j][b].x, feats[p.j][b].y),
                    )
                })
                .collect();
            let rel = recover_pose(&p.e, &corrs, k).ok()?;
            if let Some(max_deg) = opts.imu_rotation_check_deg {
                let imu_rel = imu_rot[p.j] * imu_rot[p.i].transpose();
                if rotation_angle_between(&rel.rotation, &imu_rel) > max_deg.to_radians() {
                    return None;
                }
            }
            let pb = Pose::from_matrix(&rel.rotation, rel.translation);
            let pa = Pose::identity();
            let min_par = opts.min_triangulation_deg.to_radians();
            let mut par: Vec<f64> = corrs
                .iter()
                .filter_map(|c| {
                    let x = triangulate_checked(&pa, &pb, &k.normalize(&c.a), &k.normalize(&c.b), min_par).ok()?;
                    Some(parallax(&pa, &pb, &x))
                })
                .collect();
            if par.len() < opts.min_pair_inliers {
                return None;
            }
            par.sort_by(f64::total_cmp);
            let score = par.len() as f64 * par[par.len() / 2].to_degrees();
            Some((score, pi, pb))
        })
        .collect();
    let (_, bi, pose_b) = scored
        .into_iter()
        .flatten()
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .ok_or_else(|| Error::ReconstructionFailed("no frame pair supports a two-view initialization".into()))?;
    let (a, b) = (pairs[bi].i, pairs[bi].j);
    info!("bootstrap pair: frames {} and {}", frames[a].id, frames[b].id);

    let mut builder = Builder {
        frames,
        k: *k,
        opts: *opts,
        feats,
        imu_rot,
        tracks: Vec::new(),
        frame_tracks: vec![Vec::new(); frames.len()],
        poses: vec![None; frames.len()],
        gauge: (a, b),
    };
    builder.build_tracks(&pairs);
    builder.poses[a] = Some(Pose::identity());
    builder.poses[b] = Some(pose_b);
    for t in 0..builder.tracks.len() {
        builder.triangulate_track(t);
    }
    if builder.tracks.iter().filter(|t| t.point.is_some()).count() < opts.min_registration_points {
        return Err(Error::ReconstructionFailed("bootstrap pair triangulated too few points".into()));
    }
    builder.bundle()?;

    let mut attempts = vec![0u8; frames.len()];
    let mut since_ba = 0;
    loop {
        let next = (0..frames.len())
            .filter(|&f| builder.poses[f].is_none() && attempts[f] < 2)
            .map(|f| (builder.anchors(f).len(), f))
            .filter(|&(n, _)| n >= opts.min_registration_points)
            .max_by(|x, y| x.0.cmp(&y.0).then(y.1.cmp(&x.1)));
        let Some((_, f)) = next else { break };
        attempts[f] += 1;
        if builder.register(f) {
            since_ba += 1;
            if since_ba == opts.ba_every {
                builder.bundle()?;
                since_ba = 0;
                // failed frames get another chance against the refined model
                for (g, a) in attempts.iter_mut().enumerate() {
                    if builder.poses[g].is_none() && *a == 1 {
                        *a = 0;
                    }
                }
            }
        }
    }
    builder.bundle()?;

    let model = builder.to_model();
    model.validate().map_err(|e| Error::ReconstructionFailed(format!("internal model inconsistency: {e}")))?;
    let skipped: Vec<u64> = frames.iter().filter(|f| !model.poses.contains_key(&f.id)).map(|f| f.id).collect();
    let index: BTreeMap<u64, usize> = frames.iter().enumerate().map(|(i, f)| (f.id, i)).collect();
    let point_gray = model
        .tracks
        .iter()
        .map(|t| {
            let sum: f64 = t
                .observations
                .iter()
                .map(|o| {
                    let img = &frames[index[&o.frame_id]].image;
                    let x = (o.pixel.x.round() as u32).min(img.width() - 1);
                    let y = (o.pixel.y.round() as u32).min(img.height() - 1);
                    img.get(x, y) as f64
                })
                .sum();
            (t.point_id, (sum / t.observations.len() as f64).round() as u8)
        })
        .collect();
    info!(
        "registered {}/{} frames, {} points, rmse {:.3} px",
        model.poses.len(),
        frames.len(),
        model.points.len(),
        model.reprojection_rmse()
    );
    Ok(Reconstruction { model, skipped, point_gray })
}
