//! Levenberg–Marquardt bundle adjustment with a Huber loss.
//!
//! Rotations are updated on the left, `R ← exp([δθ]×) R`, translations and
//! points additively. The reduced camera system is formed by eliminating
//! the points (Schur complement) and solved densely.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3, Matrix6, Matrix6x3, SMatrix, Vector2, Vector3, Vector6};
use roomscan_core::{CameraIntrinsics, Error, Pose, Quaternion, Result};
use serde::{Deserialize, Serialize};

use crate::linalg::skew;
use crate::model::SparseModel;

pub type Matrix2x6 = SMatrix<f64, 2, 6>;

/// RMS residual (pixels) treated as an exact fit.
pub const ZERO_RESIDUAL_PX: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BAOptions {
    pub max_iters: usize,
    pub lm_lambda_init: f64,
    pub lm_lambda_factor: f64,
    pub cost_rel_tol: f64,
    pub huber_delta_px: f64,
}

impl Default for BAOptions {
    fn default() -> Self {
        Self { max_iters: 100, lm_lambda_init: 1e-3, lm_lambda_factor: 10.0, cost_rel_tol: 1e-10, huber_delta_px: 2.0 }
    }
}

impl BAOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.lm_lambda_init > 0.0
            && self.lm_lambda_factor > 1.0
            && self.cost_rel_tol > 0.0
            && self.huber_delta_px > 0.0
            && [self.lm_lambda_init, self.lm_lambda_factor, self.cost_rel_tol, self.huber_delta_px]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("bundle adjustment options must be positive (lambda factor > 1)".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleResult {
    pub model: SparseModel,
    /// Cost before the first step, then after every accepted step.
    pub cost_trace: Vec<f64>,
    pub initial_gradient_norm: f64,
    pub final_gradient_norm: f64,
    /// LM iterations performed, accepted or not.
    pub iterations: usize,
}

/// Unit quaternion of the rotation vector `v`.
pub fn exp_quat(v: &Vector3<f64>) -> Quaternion {
    let theta = v.norm();
    let half = 0.5 * theta;
    // sin(θ/2)/θ, with its series near zero
    let k = if theta < 1e-8 { 0.5 - theta * theta / 48.0 } else { half.sin() / theta };
    Quaternion::raw(half.cos(), k * v.x, k * v.y, k * v.z)
}

/// Applies `δ = (δθ, δt)` to a pose: `R ← exp(δθ) R`, `t ← t + δt`.
pub fn perturb_pose(pose: &Pose, delta: &Vector6<f64>) -> Pose {
    let dq = exp_quat(&delta.fixed_rows::<3>(0).into());
    let q = dq * pose.rotation;
    let n = q.norm();
    Pose {
        rotation: Quaternion::raw(q.w / n, q.x / n, q.y / n, q.z / n),
        translation: pose.translation + delta.fixed_rows::<3>(3),
    }
}

/// Projection of `x` and its Jacobians with respect to the pose
/// perturbation of [`perturb_pose`] and to the point. `None` when the point
/// is not in front of the camera.
pub fn projection_jacobians(
    pose: &Pose,
    k: &CameraIntrinsics,
    x: &Vector3<f64>,
) -> Option<(Vector2<f64>, Matrix2x6, Matrix2x3<f64>)> {
    let r = pose.rotation_matrix();
    jacobians_with(&r, &pose.translation, k, x)
}

fn jacobians_with(
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    k: &CameraIntrinsics,
    x: &Vector3<f64>,
) -> Option<(Vector2<f64>, Matrix2x6, Matrix2x3<f64>)> {
    let rx = r * x;
    let p = rx + t;
    let uv = pixel_of(&p, k)?;
    let iz = 1.0 / p.z;
    let jpi = Matrix2x3::new(k.fx * iz, 0.0, -k.fx * p.x * iz * iz, 0.0, k.fy * iz, -k.fy * p.y * iz * iz);
    let mut jc = Matrix2x6::zeros();
    jc.fixed_view_mut::<2, 3>(0, 0).copy_from(&(jpi * -skew(&rx)));
    jc.fixed_view_mut::<2, 3>(0, 3).copy_from(&jpi);
    Some((uv, jc, jpi * r))
}

fn pixel_of(p: &Vector3<f64>, k: &CameraIntrinsics) -> Option<Vector2<f64>> {
    if !(p.z > 0.0) {
        return None;
    }
    let iz = 1.0 / p.z;
    Some(Vector2::new(k.fx * p.x * iz + k.cx, k.fy * p.y * iz + k.cy))
}

/// Huber cost of a residual with norm `s`, and its IRLS weight.
pub fn huber(s: f64, delta: f64) -> (f64, f64) {
    if s <= delta {
        (s * s, 1.0)
    } else {
        (2.0 * delta * s - delta * delta, delta / s)
    }
}

struct Problem {
    k: CameraIntrinsics,
    frame_ids: Vec<u64>,
    /// Per camera, per local coordinate: held fixed.
    frozen: Vec<[bool; 6]>,
    point_ids: Vec<u64>,
    /// Per point: (camera index, pixel).
    obs: Vec<Vec<(usize, Vector2<f64>)>>,
    huber: f64,
}

#[derive(Clone)]
struct State {
    poses: Vec<Pose>,
    rots: Vec<Matrix3<f64>>,
    points: Vec<Vector3<f64>>,
}

impl State {
    fn new(poses: Vec<Pose>, points: Vec<Vector3<f64>>) -> Self {
        let rots = poses.iter().map(|p| p.rotation_matrix()).collect();
        Self { poses, rots, points }
    }
}

struct Linearization {
    cost: f64,
    /// Camera blocks of the normal matrix, `6n × 6n`.
    a: DMatrix<f64>,
    gc: DVector<f64>,
    c: Vec<Matrix3<f64>>,
    gp: Vec<Vector3<f64>>,
    w: Vec<Vec<Matrix6x3<f64>>>,
}

impl Problem {
    fn cost(&self, s: &State) -> f64 {
        let mut cost = 0.0;
        for (j, obs) in self.obs.iter().enumerate() {
            for (ci, px) in obs {
                let p = s.rots[*ci] * s.points[j] + s.poses[*ci].translation;
                let Some(uv) = pixel_of(&p, &self.k) else { return f64::INFINITY };
                cost += huber((uv - px).norm(), self.huber).0;
            }
        }
        cost
    }

    fn linearize(&self, s: &State) -> Linearization {
        let n = 6 * self.frame_ids.len();
        let mut a = DMatrix::zeros(n, n);
        let mut gc = DVector::zeros(n);
        let mut c = Vec::with_capacity(self.obs.len());
        let mut gp = Vec::with_capacity(self.obs.len());
        let mut w = Vec::with_capacity(self.obs.len());
        let mut cost = 0.0;
        for (j, obs) in self.obs.iter().enumerate() {
            let mut cj = Matrix3::zeros();
            let mut gj = Vector3::zeros();
            let mut wj = Vec::with_capacity(obs.len());
            for (ci, px) in obs {
                let (uv, mut jc, jp) = jacobians_with(&s.rots[*ci], &s.poses[*ci].translation, &self.k, &s.points[j])
                    .expect("linearized at a state with positive depths");
                for (d, frozen) in self.frozen[*ci].iter().enumerate() {
                    if *frozen {
                        jc.column_mut(d).fill(0.0);
                    }
                }
                let r = uv - px;
                let (rho, wt) = huber(r.norm(), self.huber);
                cost += rho;
                let o = 6 * ci;
                let mut ab = a.fixed_view_mut::<6, 6>(o, o);
                ab += wt * jc.transpose() * jc;
                let mut gb = gc.fixed_rows_mut::<6>(o);
                gb += wt * jc.transpose() * r;
                cj += wt * jp.transpose() * jp;
                gj += wt * jp.transpose() * r;
                wj.push(wt * jc.transpose() * jp);
            }
            c.push(cj);
            gp.push(gj);
            w.push(wj);
        }
        Linearization { cost, a, gc, c, gp, w }
    }

    fn gradient_norm(&self, l: &Linearization) -> f64 {
        let g2: f64 = l.gc.norm_squared() + l.gp.iter().map(|g| g.norm_squared()).sum::<f64>();
        2.0 * g2.sqrt()
    }

    /// Damped step `(δ cameras, δ points)`, or `None` if the system is singular.
    fn step(&self, l: &Linearization, lambda: f64) -> Option<(DVector<f64>, Vec<Vector3<f64>>)> {
        let n = l.a.nrows();
        let mut s = l.a.clone();
        for i in 0..n {
            s[(i, i)] *= 1.0 + lambda;
        }
        let mut rhs = -l.gc.clone();
        let mut cinv = Vec::with_capacity(l.c.len());
        for (j, obs) in self.obs.iter().enumerate() {
            let mut cj = l.c[j];
            for d in 0..3 {
                cj[(d, d)] *= 1.0 + lambda;
            }
            let ci = cj.try_inverse()?;
            let y: Vec<Matrix6x3<f64>> = l.w[j].iter().map(|w| w * ci).collect();
            for (a, (ca, _)) in obs.iter().enumerate() {
                let mut r = rhs.fixed_rows_mut::<6>(6 * ca);
                r += y[a] * l.gp[j];
                for (b, (cb, _)) in obs.iter().enumerate() {
                    let blk: Matrix6<f64> = y[a] * l.w[j][b].transpose();
                    let mut sb = s.fixed_view_mut::<6, 6>(6 * ca, 6 * cb);
                    sb -= blk;
                }
            }
            cinv.push(ci);
        }
        for (ci, frozen) in self.frozen.iter().enumerate() {
            for (d, f) in frozen.iter().enumerate() {
                let i = 6 * ci + d;
                if *f || s[(i, i)] == 0.0 {
                    s.row_mut(i).fill(0.0);
                    s.column_mut(i).fill(0.0);
                    s[(i, i)] = 1.0;
                    rhs[i] = 0.0;
                }
            }
        }
        let dc = s.cholesky()?.solve(&rhs);
        let mut dp = Vec::with_capacity(self.obs.len());
        for (j, obs) in self.obs.iter().enumerate() {
            let mut v = -l.gp[j];
            for (a, (ca, _)) in obs.iter().enumerate() {
                v -= l.w[j][a].transpose() * dc.fixed_rows::<6>(6 * ca);
            }
            dp.push(cinv[j] * v);
        }
        Some((dc, dp))
    }

    fn apply(&self, s: &State, dc: &DVector<f64>, dp: &[Vector3<f64>]) -> State {
        let poses =
            s.poses.iter().enumerate().map(|(i, p)| perturb_pose(p, &dc.fixed_rows::<6>(6 * i).into())).collect();
        let points = s.points.iter().zip(dp).map(|(x, d)| x + d).collect();
        State::new(poses, points)
    }
}

/// Refines all poses and points of `model`. The gauge frame is held fixed
/// entirely, the scale frame in its largest translation coordinate.
pub fn bundle_adjust(model: &SparseModel, opts: &BAOptions) -> Result<BundleResult> {
    opts.validate()?;
    model.validate()?;
    let frame_ids: Vec<u64> = model.poses.keys().copied().collect();
    let cam_index: BTreeMap<u64, usize> = frame_ids.iter().enumerate().map(|(i, f)| (*f, i)).collect();
    let mut frozen = vec![[false; 6]; frame_ids.len()];
    frozen[cam_index[&model.gauge.fixed]] = [true; 6];
    let t_scale = model.poses[&model.gauge.scale].translation;
    let axis = t_scale.iamax();
    frozen[cam_index[&model.gauge.scale]][3 + axis] = true;

    let point_ids: Vec<u64> = model.tracks.iter().map(|t| t.point_id).collect();
    let obs = model
        .tracks
        .iter()
        .map(|t| t.observations.iter().map(|o| (cam_index[&o.frame_id], o.pixel)).collect())
        .collect();
    let problem = Problem { k: model.intrinsics, frame_ids, frozen, point_ids, obs, huber: opts.huber_delta_px };

    let mut state = State::new(
        problem.frame_ids.iter().map(|f| model.poses[f]).collect(),
        problem.point_ids.iter().map(|p| model.points[p]).collect(),
    );
    let mut lin = problem.linearize(&state);
    let initial_gradient_norm = problem.gradient_norm(&lin);
    let mut trace = vec![lin.cost];
    let mut lambda = opts.lm_lambda_init;
    let mut iterations = 0;
    let floor = problem.obs.iter().map(Vec::len).sum::<usize>() as f64 * ZERO_RESIDUAL_PX * ZERO_RESIDUAL_PX;
    while iterations < opts.max_iters && lin.cost > floor {
        iterations += 1;
        let accepted = match problem.step(&lin, lambda) {
            Some((dc, dp)) => {
                let cand = problem.apply(&state, &dc, &dp);
                let cost = problem.cost(&cand);
                if cost < lin.cost {
                    Some((cand, cost))
                } else {
                    None
                }
            }
            None => None,
        };
        match accepted {
            Some((cand, cost)) => {
                let rel = (lin.cost - cost) / lin.cost;
                state = cand;
                lin = problem.linearize(&state);
                trace.push(cost);
                lambda = (lambda / opts.lm_lambda_factor).max(1e-12);
                if rel < opts.cost_rel_tol {
                    break;
                }
            }
            None => {
                lambda *= opts.lm_lambda_factor;
                if lambda > 1e16 {
                    break;
                }
            }
        }
    }
    let final_gradient_norm = problem.gradient_norm(&lin);

    let mut out = model.clone();
    for (f, p) in problem.frame_ids.iter().zip(&state.poses) {
        out.poses.insert(*f, *p);
    }
    for (id, x) in problem.point_ids.iter().zip(&state.points) {
        out.points.insert(*id, *x);
    }
    Ok(BundleResult { model: out, cost_trace: trace, initial_gradient_norm, final_gradient_norm, iterations })
}

/// Huber-robust LM refinement of a single pose against fixed points.
pub fn refine_pose(
    pose: &Pose,
    points: &[Vector3<f64>],
    pixels: &[Vector2<f64>],
    k: &CameraIntrinsics,
    huber_delta: f64,
    max_iters: usize,
) -> Pose {
    let eval = |p: &Pose| -> f64 {
        let r = p.rotation_matrix();
        let mut cost = 0.0;
        for (x, u) in points.iter().zip(pixels) {
            let Some(uv) = pixel_of(&(r * x + p.translation), k) else { return f64::INFINITY };
            cost += huber((uv - u).norm(), huber_delta).0;
        }
        cost
    };
    let mut current = *pose;
    let mut cost = eval(&current);
    if !cost.is_finite() {
        return current;
    }
    let mut lambda = 1e-3;
    for _ in 0..max_iters {
        if cost == 0.0 {
            break;
        }
        let r = current.rotation_matrix();
        let mut h = Matrix6::zeros();
        let mut g = Vector6::zeros();
        for (x, u) in points.iter().zip(pixels) {
            let Some((uv, jc, _)) = jacobians_with(&r, &current.translation, k, x) else { continue };
            let res = uv - u;
            let w = huber(res.norm(), huber_delta).1;
            h += w * jc.transpose() * jc;
            g += w * jc.transpose() * res;
        }
        let mut hd = h;
        for d in 0..6 {
            hd[(d, d)] *= 1.0 + lambda;
        }
        let Some(step) = hd.cholesky().map(|c| c.solve(&-g)) else {
            lambda *= 10.0;
            continue;
        };
        let cand = perturb_pose(&current, &step);
        let c = eval(&cand);
        if c < cost {
            let rel = (cost - c) / cost;
            current = cand;
            cost = c;
            lambda = (lambda / 10.0).max(1e-12);
            if rel < 1e-12 {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e16 {
                break;
            }
        }
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_quat_matches_axis_angle() {
        let v = Vector3::new(0.3, -0.2, 0.5);
        let a = exp_quat(&v);
        let b = Quaternion::from_rotation_vector(&v);
        assert!((a.to_rotation_matrix() - b.to_rotation_matrix()).norm() < 1e-14);
        assert_eq!(exp_quat(&Vector3::zeros()), Quaternion::IDENTITY);
    }

    #[test]
    fn huber_is_continuous() {
        let (a, _) = huber(2.0, 2.0);
        let (b, w) = huber(2.0 + 1e-12, 2.0);
        assert!((a - b).abs() < 1e-9);
        assert!(w < 1.0);
    }

    #[test]
    fn options_validate() {
        assert!(BAOptions::default().validate().is_ok());
        assert!(BAOptions { huber_delta_px: 0.0, ..Default::default() }.validate().is_err());
        assert!(BAOptions { max_iters: 0, ..Default::default() }.validate().is_err());
    }
}
