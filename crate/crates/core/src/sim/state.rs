//! Floating-base generalized state.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::sim::model::RobotModel;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloatingBaseState {
    pub root_position: Vector3<f64>,
    pub root_orientation: UnitQuaternion<f64>,
    /// World frame.
    pub root_linear_velocity: Vector3<f64>,
    /// Body frame.
    pub root_angular_velocity: Vector3<f64>,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    /// Joint accelerations from the last physics substep, for the
    /// acceleration penalty.
    pub qddot_last: Vec<f64>,
    /// Net contact force per foot, world frame.
    pub feet_contact_forces: Vec<Vector3<f64>>,
    /// Seconds each foot has spent airborne (0 while in contact).
    pub feet_air_time: Vec<f64>,
    pub sim_time: f64,
}

impl FloatingBaseState {
    /// Default pose at the given root height, at rest.
    pub fn standing(model: &RobotModel, root_height: f64) -> Self {
        FloatingBaseState {
            root_position: Vector3::new(0.0, 0.0, root_height),
            root_orientation: UnitQuaternion::identity(),
            root_linear_velocity: Vector3::zeros(),
            root_angular_velocity: Vector3::zeros(),
            q: model.default_pose(),
            qdot: vec![0.0; model.n_dof()],
            qddot_last: vec![0.0; model.n_dof()],
            feet_contact_forces: vec![Vector3::zeros(); model.feet.len()],
            feet_air_time: vec![0.0; model.feet.len()],
            sim_time: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.root_position.iter().all(|x| x.is_finite())
            && self.root_orientation.coords.iter().all(|x| x.is_finite())
            && self.root_linear_velocity.iter().all(|x| x.is_finite())
            && self.root_angular_velocity.iter().all(|x| x.is_finite())
            && self.q.iter().all(|x| x.is_finite())
            && self.qdot.iter().all(|x| x.is_finite())
    }

    /// Roll and pitch of the root (ZYX yaw-pitch-roll convention).
    pub fn roll_pitch(&self) -> (f64, f64) {
        let (roll, pitch, _) = self.root_orientation.euler_angles();
        (roll, pitch)
    }

    pub fn yaw(&self) -> f64 {
        self.root_orientation.euler_angles().2
    }
}
