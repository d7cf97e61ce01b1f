//! Robot model: kinematic tree, mass properties, joint limits, contact
//! points, and the default 19-DoF humanoid.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::sim::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BodyGroup {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    /// Rotation axis, unit vector in the parent frame.
    pub axis: Vector3<f64>,
    /// [min, max] in rad.
    pub position_limits: [f64; 2],
    pub velocity_limit: f64,
    pub torque_limit: f64,
    pub default_angle: f64,
    pub body_group: BodyGroup,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    /// Index of the parent link; the root has `parent = None`.
    pub parent: Option<usize>,
    /// Joint origin in the parent frame (unused for the root).
    pub attach: Vector3<f64>,
    pub mass: f64,
    /// Center of mass offset in the link frame.
    pub com: Vector3<f64>,
    /// Rotational inertia about the COM, link frame.
    pub inertia: Matrix3<f64>,
}

/// A named point fixed to a link, used for retargeting targets and
/// evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Keypoint {
    pub name: String,
    pub link: usize,
    pub offset: Vector3<f64>,
}

/// One foot: the link index plus its ground-contact points in foot frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Foot {
    pub link: usize,
    pub points: Vec<Vector3<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PDGains {
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotModel {
    /// links[0] is the floating base; link i (i >= 1) is driven by joint i-1.
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    pub feet: Vec<Foot>,
    pub keypoints: Vec<Keypoint>,
    pub gains: PDGains,
    /// Treat the base as welded to the world (test rigs, chains).
    #[serde(default)]
    pub fixed_base: bool,
}

impl RobotModel {
    pub fn n_dof(&self) -> usize {
        self.joints.len()
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn default_pose(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.default_angle).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn lower_indices(&self) -> Vec<usize> {
        (0..self.n_dof()).filter(|&i| self.joints[i].body_group == BodyGroup::Lower).collect()
    }

    pub fn upper_indices(&self) -> Vec<usize> {
        (0..self.n_dof()).filter(|&i| self.joints[i].body_group == BodyGroup::Upper).collect()
    }

    pub fn clamp_to_limits(&self, q: &mut [f64]) {
        for (qi, j) in q.iter_mut().zip(self.joints.iter()) {
            *qi = qi.clamp(j.position_limits[0], j.position_limits[1]);
        }
    }

    /// Tree structure, positive masses, SPD inertias, sane joint limits.
    pub fn validate(&self) -> Result<(), SimError> {
        if self.links.len() != self.joints.len() + 1 {
            return Err(SimError::BadModel("links must equal joints + 1".into()));
        }
        for (i, link) in self.links.iter().enumerate() {
            match link.parent {
                None if i != 0 => {
                    return Err(SimError::BadModel(format!("link {i} has no parent")))
                }
                Some(p) if p >= i => {
                    return Err(SimError::BadModel(format!(
                        "link {i} parent {p} must have a smaller index"
                    )))
                }
                _ => {}
            }
            if link.mass <= 0.0 {
                return Err(SimError::BadModel(format!("link {i} mass must be positive")));
            }
            let sym = (link.inertia - link.inertia.transpose()).norm();
            if sym > 1e-9 {
                return Err(SimError::BadModel(format!("link {i} inertia not symmetric")));
            }
            let chol = link.inertia.cholesky();
            if chol.is_none() {
                return Err(SimError::BadModel(format!("link {i} inertia not SPD")));
            }
        }
        for (i, j) in self.joints.iter().enumerate() {
            if j.position_limits[0] >= j.position_limits[1] {
                return Err(SimError::BadModel(format!("joint {i}: min >= max")));
            }
            if j.velocity_limit <= 0.0 || j.torque_limit <= 0.0 {
                return Err(SimError::BadModel(format!("joint {i}: nonpositive limit")));
            }
            if j.default_angle < j.position_limits[0] || j.default_angle > j.position_limits[1] {
                return Err(SimError::BadModel(format!("joint {i}: default outside limits")));
            }
            if (j.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(SimError::BadModel(format!("joint {i}: axis not unit")));
            }
        }
        Ok(())
    }

    pub fn save_toml(&self, path: &Path) -> Result<(), SimError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| SimError::BadModel(format!("serialize: {e}")))?;
        std::fs::write(path, text).map_err(|e| SimError::BadModel(format!("write: {e}")))?;
        Ok(())
    }

    pub fn load_toml(path: &Path) -> Result<Self, SimError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SimError::BadModel(format!("read: {e}")))?;
        let model: RobotModel =
            toml::from_str(&text).map_err(|e| SimError::BadModel(format!("parse: {e}")))?;
        model.validate()?;
        Ok(model)
    }
}

fn diag(x: f64, y: f64, z: f64) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(x, y, z))
}

struct LegSide {
    sign: f64,
    tag: &'static str,
}

/// Adult-scale 19-DoF humanoid: 10 leg DoF, 1 torso DoF, 4 DoF per arm.
pub fn build_default_humanoid() -> RobotModel {
    let mut links = vec![LinkSpec {
        name: "pelvis".into(),
        parent: None,
        attach: Vector3::zeros(),
        mass: 8.0,
        com: Vector3::new(0.0, 0.0, 0.02),
        inertia: diag(0.08, 0.06, 0.06),
    }];
    let mut joints: Vec<JointSpec> = Vec::new();
    let mut feet = Vec::new();
    let mut keypoints = Vec::new();

    let mut add = |links: &mut Vec<LinkSpec>,
                   joints: &mut Vec<JointSpec>,
                   name: String,
                   parent: usize,
                   attach: Vector3<f64>,
                   axis: Vector3<f64>,
                   mass: f64,
                   com: Vector3<f64>,
                   inertia: Matrix3<f64>,
                   limits: [f64; 2],
                   torque: f64,
                   default_angle: f64,
                   group: BodyGroup|
     -> usize {
        links.push(LinkSpec { name: name.clone(), parent: Some(parent), attach, mass, com, inertia });
        joints.push(JointSpec {
            name,
            axis,
            position_limits: limits,
            velocity_limit: 23.0,
            torque_limit: torque,
            default_angle,
            body_group: group,
        });
        links.len() - 1
    };

    let x = Vector3::x();
    let y = Vector3::y();
    let z = Vector3::z();
    for side in [LegSide { sign: 1.0, tag: "left" }, LegSide { sign: -1.0, tag: "right" }] {
        let s = side.sign;
        let t = side.tag;
        let hip_yaw = add(
            &mut links, &mut joints,
            format!("{t}_hip_yaw"), 0, Vector3::new(0.0, s * 0.10, -0.10), z,
            1.2, Vector3::new(0.0, 0.0, -0.03), diag(0.004, 0.004, 0.003),
            [-0.6, 0.6], 120.0, 0.0, BodyGroup::Lower,
        );
        let hip_roll = add(
            &mut links, &mut joints,
            format!("{t}_hip_roll"), hip_yaw, Vector3::new(0.0, 0.0, -0.06), x,
            1.5, Vector3::new(0.0, 0.0, -0.02), diag(0.004, 0.004, 0.003),
            [-0.5, 0.5], 120.0, 0.0, BodyGroup::Lower,
        );
        let thigh = add(
            &mut links, &mut joints,
            format!("{t}_hip_pitch"), hip_roll, Vector3::new(0.0, 0.0, -0.04), y,
            4.5, Vector3::new(0.0, 0.0, -0.20), diag(0.06, 0.06, 0.01),
            [-1.8, 0.8], 200.0, -0.25, BodyGroup::Lower,
        );
        let shank = add(
            &mut links, &mut joints,
            format!("{t}_knee"), thigh, Vector3::new(0.0, 0.0, -0.40), y,
            2.8, Vector3::new(0.0, 0.0, -0.18), diag(0.04, 0.04, 0.005),
            [0.05, 2.3], 200.0, 0.5, BodyGroup::Lower,
        );
        let foot = add(
            &mut links, &mut joints,
            format!("{t}_ankle"), shank, Vector3::new(0.0, 0.0, -0.40), y,
            1.2, Vector3::new(0.02, 0.0, -0.04), diag(0.010, 0.025, 0.025),
            [-0.9, 0.7], 60.0, -0.23, BodyGroup::Lower,
        );
        feet.push(Foot {
            link: foot,
            points: vec![Vector3::new(0.15, 0.0, -0.07), Vector3::new(-0.11, 0.0, -0.07)],
        });
        keypoints.push(Keypoint { name: format!("{t}_hip"), link: thigh, offset: Vector3::zeros() });
        keypoints.push(Keypoint { name: format!("{t}_knee"), link: shank, offset: Vector3::zeros() });
        keypoints.push(Keypoint { name: format!("{t}_ankle"), link: foot, offset: Vector3::zeros() });
    }

    let torso = add(
        &mut links, &mut joints,
        "torso_yaw".into(), 0, Vector3::new(0.0, 0.0, 0.12), z,
        16.0, Vector3::new(0.03, 0.0, 0.22), diag(0.40, 0.35, 0.12),
        [-1.0, 1.0], 150.0, 0.0, BodyGroup::Upper,
    );

    for side in [LegSide { sign: 1.0, tag: "left" }, LegSide { sign: -1.0, tag: "right" }] {
        let s = side.sign;
        let t = side.tag;
        let sh_pitch = add(
            &mut links, &mut joints,
            format!("{t}_shoulder_pitch"), torso, Vector3::new(0.0, s * 0.16, 0.35), y,
            1.0, Vector3::new(0.0, s * 0.04, 0.0), diag(0.003, 0.003, 0.003),
            [-2.5, 2.0], 60.0, 0.0, BodyGroup::Upper,
        );
        let roll_limits = if s > 0.0 { [-0.34, 2.5] } else { [-2.5, 0.34] };
        let sh_roll = add(
            &mut links, &mut joints,
            format!("{t}_shoulder_roll"), sh_pitch, Vector3::new(0.0, s * 0.06, 0.0), x,
            0.9, Vector3::new(0.0, 0.0, -0.03), diag(0.003, 0.003, 0.002),
            roll_limits, 60.0, 0.0, BodyGroup::Upper,
        );
        let upper_arm = add(
            &mut links, &mut joints,
            format!("{t}_shoulder_yaw"), sh_roll, Vector3::new(0.0, 0.0, -0.05), z,
            1.1, Vector3::new(0.0, 0.0, -0.12), diag(0.010, 0.010, 0.002),
            [-2.0, 2.0], 40.0, 0.0, BodyGroup::Upper,
        );
        let forearm = add(
            &mut links, &mut joints,
            format!("{t}_elbow"), upper_arm, Vector3::new(0.0, 0.0, -0.25), y,
            0.8, Vector3::new(0.0, 0.0, -0.12), diag(0.008, 0.008, 0.002),
            [-0.8, 2.5], 40.0, 0.3, BodyGroup::Upper,
        );
        keypoints.push(Keypoint { name: format!("{t}_shoulder"), link: sh_pitch, offset: Vector3::zeros() });
        keypoints.push(Keypoint { name: format!("{t}_elbow"), link: forearm, offset: Vector3::zeros() });
        keypoints.push(Keypoint { name: format!("{t}_wrist"), link: forearm, offset: Vector3::new(0.0, 0.0, -0.25) });
    }

    // PD gains indexed like joints: legs, torso, arms.
    let mut kp = Vec::new();
    let mut kd = Vec::new();
    for j in &joints {
        let (p, d) = match j.name.as_str() {
            n if n.contains("hip_pitch") || n.contains("knee") => (500.0, 12.0),
            n if n.contains("hip") => (250.0, 8.0),
            n if n.contains("ankle") => (800.0, 8.0),
            n if n.contains("torso") => (300.0, 8.0),
            n if n.contains("shoulder") => (100.0, 3.0),
            _ => (60.0, 2.0),
        };
        kp.push(p);
        kd.push(d);
    }

    let model = RobotModel {
        links,
        joints,
        feet,
        keypoints,
        gains: PDGains { kp, kd },
        fixed_base: false,
    };
    model.validate().expect("default humanoid must validate");
    model
}
