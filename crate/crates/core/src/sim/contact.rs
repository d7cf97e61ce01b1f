//! Point-penalty ground contacts: spring-damper normal force with a Coulomb
//! friction cone clamp, over flat or cell-noise rough terrain.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::sim::fk::BodyPoses;
use crate::sim::model::RobotModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerrainKind {
    Flat,
    Rough,
}

/// Ground height field. Rough terrain draws per-cell height noise in
/// [-0.02, 0.02] m on a 0.1 m grid, deterministic in (cell, seed).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Terrain {
    pub kind: TerrainKind,
    pub seed: u64,
    pub cell_size: f64,
    pub amplitude: f64,
}

impl Terrain {
    pub fn flat() -> Self {
        Terrain { kind: TerrainKind::Flat, seed: 0, cell_size: 0.1, amplitude: 0.02 }
    }

    pub fn rough(seed: u64) -> Self {
        Terrain { kind: TerrainKind::Rough, seed, cell_size: 0.1, amplitude: 0.02 }
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            TerrainKind::Flat => 0.0,
            TerrainKind::Rough => {
                let ix = (x / self.cell_size).floor() as i64;
                let iy = (y / self.cell_size).floor() as i64;
                let mut h = self.seed ^ (ix as u64).wrapping_mul(0x9E3779B97F4A7C15);
                h ^= (iy as u64).wrapping_mul(0xBF58476D1CE4E5B9);
                h = h.wrapping_mul(0x94D049BB133111EB);
                h ^= h >> 31;
                let unit = (h >> 11) as f64 / (1u64 << 53) as f64; // [0, 1)
                (2.0 * unit - 1.0) * self.amplitude
            }
        }
    }
}

/// Contact force on one foot point.
#[derive(Debug, Clone)]
pub struct PointContact {
    pub foot: usize,
    /// World-frame force applied to the foot at the point.
    pub force: Vector3<f64>,
    /// Point position in the foot link frame.
    pub point_link: Vector3<f64>,
    pub penetration: f64,
}

/// Spring-damper penalty force per foot contact point.
///
/// Normal (up): `max(0, stiffness * depth + damping * depth_rate)`;
/// tangential: viscous drag clamped to the friction cone `mu * normal`.
pub fn contact_forces(
    model: &RobotModel,
    poses: &BodyPoses,
    terrain: &Terrain,
    stiffness: f64,
    damping: f64,
    friction: f64,
) -> Vec<PointContact> {
    let mut contacts = Vec::new();
    for (fi, foot) in model.feet.iter().enumerate() {
        for pt in &foot.points {
            let pos = poses.point_on_link(foot.link, pt);
            let ground = terrain.height(pos.x, pos.y);
            let depth = ground - pos.z;
            if depth <= 0.0 {
                continue;
            }
            let vel = poses.point_velocity(foot.link, pt);
            let depth_rate = -vel.z;
            let normal = (stiffness * depth + damping * depth_rate).max(0.0);
            let mut tangential = Vector3::new(-damping * vel.x, -damping * vel.y, 0.0);
            let t_norm = tangential.norm();
            let max_t = friction * normal;
            if t_norm > max_t && t_norm > 0.0 {
                tangential *= max_t / t_norm;
            }
            contacts.push(PointContact {
                foot: fi,
                force: Vector3::new(tangential.x, tangential.y, normal),
                point_link: *pt,
                penetration: depth,
            });
        }
    }
    contacts
}
