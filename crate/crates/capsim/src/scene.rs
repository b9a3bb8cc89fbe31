use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use roomscan_core::{Error, Result};

/// Axis-aligned box room centered at the origin, `z` up, with a procedural
/// texture on each of its six walls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoomScene {
    pub half_extents: Vector3<f64>,
    pub texture_seed: u64,
    /// Checker square side, meters.
    pub checker_period: f64,
    /// Expected dots per square meter; 0 disables dots.
    pub dot_density: f64,
    pub dot_radius: f64,
    /// Supersampling per pixel axis when rendering.
    pub samples_per_axis: u32,
}

impl Default for RoomScene {
    fn default() -> Self {
        Self {
            half_extents: Vector3::new(2.5, 2.0, 1.3),
            texture_seed: 7,
            checker_period: 0.2,
            dot_density: 4.0,
            dot_radius: 0.018,
            samples_per_axis: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Wall {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl Wall {
    pub const ALL: [Wall; 6] = [Wall::PosX, Wall::NegX, Wall::PosY, Wall::NegY, Wall::PosZ, Wall::NegZ];

    pub fn axis(self) -> usize {
        match self {
            Wall::PosX | Wall::NegX => 0,
            Wall::PosY | Wall::NegY => 1,
            Wall::PosZ | Wall::NegZ => 2,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Wall::PosX | Wall::PosY | Wall::PosZ => 1.0,
            _ => -1.0,
        }
    }

    /// The two in-plane axes used as texture coordinates `(u, v)`.
    pub fn plane_axes(self) -> (usize, usize) {
        match self.axis() {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

const LIGHT_BASE: f64 = 135.0;
const LIGHT_SPAN: f64 = 55.0;
const DARK_BASE: f64 = 40.0;
const DARK_SPAN: f64 = 55.0;
const DOT_DARK: f64 = 18.0;
const DOT_BRIGHT: f64 = 232.0;

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn cell_hash(seed: u64, wall: Wall, salt: u64, i: i64, j: i64) -> u64 {
    let mut h = mix64(seed ^ salt);
    h = mix64(h ^ wall.index());
    h = mix64(h ^ i as u64);
    mix64(h ^ (j as u64).rotate_left(32))
}

fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// A dot on a wall, in wall texture coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dot {
    pub center: Vector2<f64>,
    pub luminance: f64,
}

impl RoomScene {
    pub fn validate(&self) -> Result<()> {
        if !self.half_extents.iter().all(|&h| h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument("room half extents must be positive".into()));
        }
        if !(self.checker_period > 0.0) {
            return Err(Error::InvalidArgument("checker period must be positive".into()));
        }
        if !(self.dot_density >= 0.0) || !(self.dot_radius >= 0.0) {
            return Err(Error::InvalidArgument("dot density and radius must be nonnegative".into()));
        }
        if self.dot_density > 0.0 && 2.0 * self.dot_radius >= self.dot_cell() {
            return Err(Error::InvalidArgument("dots too large for their density".into()));
        }
        if self.samples_per_axis == 0 {
            return Err(Error::InvalidArgument("samples_per_axis must be at least 1".into()));
        }
        Ok(())
    }

    pub fn diagonal(&self) -> f64 {
        2.0 * self.half_extents.norm()
    }

    /// Strictly inside the box.
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|a| p[a].abs() < self.half_extents[a])
    }

    fn dot_cell(&self) -> f64 {
        1.0 / self.dot_density.sqrt()
    }

    /// Extent `(u, v)` of a wall's texture plane: coordinates lie in `[-eu, eu] x [-ev, ev]`.
    pub fn wall_extent(&self, wall: Wall) -> (f64, f64) {
        let (a, b) = wall.plane_axes();
        (self.half_extents[a], self.half_extents[b])
    }

    /// Point on `wall` at texture coordinates `(u, v)`.
    pub fn wall_point(&self, wall: Wall, u: f64, v: f64) -> Vector3<f64> {
        let (a, b) = wall.plane_axes();
        let mut p = Vector3::zeros();
        p[wall.axis()] = wall.sign() * self.half_extents[wall.axis()];
        p[a] = u;
        p[b] = v;
        p
    }

    /// The dot owned by dot cell `(i, j)` of `wall`, if dots are enabled.
    pub fn dot_in_cell(&self, wall: Wall, i: i64, j: i64) -> Option<Dot> {
        if self.dot_density <= 0.0 {
            return None;
        }
        let cell = self.dot_cell();
        let h = cell_hash(self.texture_seed, wall, 0xD07, i, j);
        let span = cell - 2.0 * self.dot_radius;
        let ou = self.dot_radius + span * unit_f64(mix64(h));
        let ov = self.dot_radius + span * unit_f64(mix64(h ^ 1));
        let luminance = if h & 1 == 0 { DOT_DARK } else { DOT_BRIGHT };
        Some(Dot { center: Vector2::new(i as f64 * cell + ou, j as f64 * cell + ov), luminance })
    }

    /// Procedural luminance of `wall` at texture coordinates `(u, v)`.
    ///
    /// Checker squares are centered on multiples of the period and alternate
    /// light/dark with a per-square seeded level. Dots of fixed radius sit at
    /// one seeded position per dot cell.
    pub fn texture(&self, wall: Wall, u: f64, v: f64) -> f64 {
        if self.dot_density > 0.0 {
            let cell = self.dot_cell();
            let (i, j) = ((u / cell).floor() as i64, (v / cell).floor() as i64);
            if let Some(dot) = self.dot_in_cell(wall, i, j) {
                let d2 = (u - dot.center.x).powi(2) + (v - dot.center.y).powi(2);
                if d2 <= self.dot_radius * self.dot_radius {
                    return dot.luminance;
                }
            }
        }
        let p = self.checker_period;
        let (i, j) = ((u / p + 0.5).floor() as i64, (v / p + 0.5).floor() as i64);
        let level = unit_f64(cell_hash(self.texture_seed, wall, 0xC4E, i, j));
        if (i + j).rem_euclid(2) == 0 {
            LIGHT_BASE + LIGHT_SPAN * level
        } else {
            DARK_BASE + DARK_SPAN * level
        }
    }

    /// Nearest wall hit by the ray `origin + s * dir` (`s > 0`) from inside the box,
    /// with the hit's texture coordinates.
    pub fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(Wall, f64, f64)> {
        let mut best: Option<(f64, Wall)> = None;
        for axis in 0..3 {
            let d = dir[axis];
            if d == 0.0 {
                continue;
            }
            let (bound, wall) = if d > 0.0 {
                (self.half_extents[axis], [Wall::PosX, Wall::PosY, Wall::PosZ][axis])
            } else {
                (-self.half_extents[axis], [Wall::NegX, Wall::NegY, Wall::NegZ][axis])
            };
            let s = (bound - origin[axis]) / d;
            if s > 0.0 && best.is_none_or(|(b, _)| s < b) {
                best = Some((s, wall));
            }
        }
        let (s, wall) = best?;
        let hit = origin + dir * s;
        let (a, b) = wall.plane_axes();
        Some((wall, hit[a], hit[b]))
    }

    pub fn luminance_along(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> f64 {
        match self.cast(origin, dir) {
            Some((wall, u, v)) => self.texture(wall, u, v),
            None => 0.0,
        }
    }

    /// Checker corners strictly inside each wall, then dot centers, with ids
    /// numbered in that order.
    pub fn landmarks(&self) -> Vec<Landmark> {
        let mut out = Vec::new();
        let p = self.checker_period;
        for wall in Wall::ALL {
            let (eu, ev) = self.wall_extent(wall);
            let (i0, i1) = ((-eu / p - 0.5).floor() as i64, (eu / p - 0.5).ceil() as i64);
            let (j0, j1) = ((-ev / p - 0.5).floor() as i64, (ev / p - 0.5).ceil() as i64);
            for i in i0..=i1 {
                for j in j0..=j1 {
                    let (u, v) = ((i as f64 + 0.5) * p, (j as f64 + 0.5) * p);
                    if u.abs() < eu && v.abs() < ev {
                        out.push((wall, u, v, LandmarkKind::Corner));
                    }
                }
            }
        }
        if self.dot_density > 0.0 {
            let cell = self.dot_cell();
            for wall in Wall::ALL {
                let (eu, ev) = self.wall_extent(wall);
                let (i0, i1) = ((-eu / cell).floor() as i64, (eu / cell).floor() as i64);
                let (j0, j1) = ((-ev / cell).floor() as i64, (ev / cell).floor() as i64);
                for i in i0..=i1 {
                    for j in j0..=j1 {
                        if let Some(d) = self.dot_in_cell(wall, i, j) {
                            let r = self.dot_radius;
                            if d.center.x.abs() + r < eu && d.center.y.abs() + r < ev {
                                out.push((wall, d.center.x, d.center.y, LandmarkKind::Dot));
                            }
                        }
                    }
                }
            }
        }
        out.into_iter()
            .enumerate()
            .map(|(id, (wall, u, v, kind))| Landmark { id: id as u64, position: self.wall_point(wall, u, v), kind })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkKind {
    Corner,
    Dot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: u64,
    pub position: Vector3<f64>,
    pub kind: LandmarkKind,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_is_deterministic_and_seeded() {
        let a = RoomScene::default();
        let mut b = a.clone();
        for k in 0..200 {
            let (u, v) = (k as f64 * 0.037 - 3.0, k as f64 * 0.021 - 1.0);
            assert_eq!(a.texture(Wall::PosX, u, v), b.texture(Wall::PosX, u, v));
        }
        b.texture_seed += 1;
        let differs = (0..200).any(|k| {
            let (u, v) = (k as f64 * 0.037 - 3.0, k as f64 * 0.021 - 1.0);
            a.texture(Wall::NegY, u, v) != b.texture(Wall::NegY, u, v)
        });
        assert!(differs);
    }

    #[test]
    fn checker_alternates_light_and_dark() {
        let s = RoomScene { dot_density: 0.0, ..RoomScene::default() };
        let p = s.checker_period;
        let light = s.texture(Wall::PosZ, 0.1 * p, 0.2 * p);
        let dark = s.texture(Wall::PosZ, 1.1 * p, 0.2 * p);
        assert!(light >= LIGHT_BASE && dark < DARK_BASE + DARK_SPAN && light > dark);
    }

    #[test]
    fn cast_hits_nearest_wall() {
        let s = RoomScene::default();
        let (wall, u, v) = s.cast(&Vector3::zeros(), &Vector3::new(1.0, 0.1, 0.0)).unwrap();
        assert_eq!(wall, Wall::PosX);
        assert!((u - 0.25).abs() < 1e-12 && v.abs() < 1e-12);
        let (wall, ..) = s.cast(&Vector3::new(0.0, 0.0, 1.0), &Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(wall, Wall::PosZ);
    }

    #[test]
    fn landmarks_lie_on_walls() {
        let s = RoomScene::default();
        let lms = s.landmarks();
        assert!(lms.len() > 1000);
        for lm in &lms {
            let on_wall = (0..3).any(|a| (lm.position[a].abs() - s.half_extents[a]).abs() < 1e-12);
            let inside = (0..3).all(|a| lm.position[a].abs() <= s.half_extents[a] + 1e-12);
            assert!(on_wall && inside);
        }
        assert!(lms.windows(2).all(|w| w[1].id == w[0].id + 1));
    }

    #[test]
    fn validation() {
        assert!(RoomScene { half_extents: Vector3::new(1.0, 0.0, 1.0), ..Default::default() }.validate().is_err());
        assert!(RoomScene { dot_density: 1000.0, ..Default::default() }.validate().is_err());
        assert!(RoomScene::default().validate().is_ok());
    }
}
