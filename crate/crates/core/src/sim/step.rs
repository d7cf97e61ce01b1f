//! Time stepping: PD control with action delay, contacts, articulated
//! dynamics, velocity-then-averaged-position integration, pushes.

use std::collections::VecDeque;

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::sim::contact::contact_forces;
use crate::sim::dynamics::{articulated_forward_dynamics, gravity_forces, LinkForce};
use crate::sim::fk::{forward_kinematics, standing_root_height};
use crate::sim::model::{PDGains, RobotModel};
use crate::sim::randomize::{apply_randomization, RandomizationSample};
use crate::sim::state::FloatingBaseState;
use crate::sim::SimError;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    /// m/s^2, downward.
    pub gravity: f64,
    pub dt_physics: f64,
    /// Physics substeps per policy action (10 -> 50 Hz policy at 500 Hz).
    pub control_decimation: usize,
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    pub friction_coefficient: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            gravity: 9.81,
            dt_physics: 0.002,
            control_decimation: 10,
            contact_stiffness: 2e4,
            contact_damping: 500.0,
            friction_coefficient: 0.8,
        }
    }
}

impl SimConfig {
    pub fn control_dt(&self) -> f64 {
        self.dt_physics * self.control_decimation as f64
    }
}

/// PD torque law with clamping:
/// `tau = clamp(kp (q_target - q) - kd qdot, +-torque_limit)`.
pub fn pd_torques(
    gains: &PDGains,
    q_target: &[f64],
    q: &[f64],
    qdot: &[f64],
    torque_limits: &[f64],
) -> Vec<f64> {
    let n = q.len();
    assert!(q_target.len() == n && qdot.len() == n && gains.kp.len() == n);
    (0..n)
        .map(|i| {
            let tau = gains.kp[i] * (q_target[i] - q[i]) - gains.kd[i] * qdot[i];
            tau.clamp(-torque_limits[i], torque_limits[i])
        })
        .collect()
}

/// What happened inside one control step, for reward computation.
#[derive(Debug, Clone)]
pub struct StepInfo {
    /// Per foot: Some(air time) if the foot touched down this step.
    pub touchdown_air_time: Vec<Option<f64>>,
    /// Torques applied on the last substep.
    pub torques: Vec<f64>,
    /// True if a push was applied this step.
    pub pushed: bool,
}

/// One simulator instance: owns its state, randomized model copy, action
/// delay queue, and the push schedule. Single-threaded by construction.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub model: RobotModel,
    /// Randomization baked in (masses, COM); geometry identical.
    model_rand: RobotModel,
    pub state: FloatingBaseState,
    pub config: SimConfig,
    pub sample: RandomizationSample,
    gains: PDGains,
    /// Pending (activation_time, target) pairs implementing control delay.
    pending: VecDeque<(f64, Vec<f64>)>,
    current_target: Vec<f64>,
    rng: ChaCha8Rng,
    next_push: f64,
    pub nominal_root_height: f64,
}

impl Simulator {
    pub fn new(
        model: RobotModel,
        config: SimConfig,
        sample: RandomizationSample,
        seed: u64,
    ) -> Self {
        let nominal = standing_root_height(&model);
        let state = FloatingBaseState::standing(&model, nominal);
        let model_rand = apply_randomization(&model, &sample);
        let gains = PDGains {
            kp: model.gains.kp.iter().map(|k| k * sample.p_gain_scale).collect(),
            kd: model.gains.kd.iter().map(|k| k * sample.d_gain_scale).collect(),
        };
        let current_target = model.default_pose();
        let next_push = sample.push_interval;
        Simulator {
            model,
            model_rand,
            state,
            config,
            sample,
            gains,
            pending: VecDeque::new(),
            current_target,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_push,
            nominal_root_height: nominal,
        }
    }

    pub fn reset(&mut self, sample: RandomizationSample, seed: u64) {
        self.model_rand = apply_randomization(&self.model, &sample);
        self.gains = PDGains {
            kp: self.model.gains.kp.iter().map(|k| k * sample.p_gain_scale).collect(),
            kd: self.model.gains.kd.iter().map(|k| k * sample.d_gain_scale).collect(),
        };
        self.state = FloatingBaseState::standing(&self.model, self.nominal_root_height);
        self.current_target = self.model.default_pose();
        self.pending.clear();
        self.next_push = sample.push_interval;
        self.sample = sample;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Hold one PD target for `control_decimation` substeps, honoring the
    /// sampled control delay.
    pub fn step(&mut self, target: &[f64]) -> Result<StepInfo, SimError> {
        assert_eq!(target.len(), self.model.n_dof());
        if !target.iter().all(|x| x.is_finite()) {
            return Err(SimError::NonFinite("action target".into()));
        }
        self.pending
            .push_back((self.state.sim_time + self.sample.control_delay, target.to_vec()));

        let mut info = StepInfo {
            touchdown_air_time: vec![None; self.model.feet.len()],
            torques: vec![0.0; self.model.n_dof()],
            pushed: false,
        };
        for _ in 0..self.config.control_decimation {
            self.substep(&mut info)?;
        }
        if !self.state.is_finite() {
            return Err(SimError::NonFiniteState);
        }
        Ok(info)
    }

    fn substep(&mut self, info: &mut StepInfo) -> Result<(), SimError> {
        let dt = self.config.dt_physics;
        let t = self.state.sim_time;

        // Push perturbation: reset xy velocity to a random direction.
        if t >= self.next_push {
            let angle = self.rng.gen_range(0.0..std::f64::consts::TAU);
            let v = self.sample.push_velocity;
            self.state.root_linear_velocity.x = v * angle.cos();
            self.state.root_linear_velocity.y = v * angle.sin();
            self.next_push += self.sample.push_interval;
            info.pushed = true;
        }

        while let Some((activate, _)) = self.pending.front() {
            if *activate <= t {
                self.current_target = self.pending.pop_front().unwrap().1;
            } else {
                break;
            }
        }

        let poses = forward_kinematics(&self.model_rand, &self.state);
        let torques = pd_torques(
            &self.gains,
            &self.current_target,
            &self.state.q,
            &self.state.qdot,
            &self.model.joints.iter().map(|j| j.torque_limit).collect::<Vec<_>>(),
        );

        let mut external = gravity_forces(&self.model_rand, &poses, self.config.gravity);
        let contacts = contact_forces(
            &self.model_rand,
            &poses,
            &self.sample.terrain,
            self.config.contact_stiffness,
            self.config.contact_damping,
            self.sample.friction,
        );
        let mut feet_forces = vec![Vector3::zeros(); self.model.feet.len()];
        for c in &contacts {
            let link = self.model.feet[c.foot].link;
            feet_forces[c.foot] += c.force;
            let lf = LinkForce::from_world_force_at_point(
                &poses.links[link].rot,
                &c.point_link,
                &c.force,
            );
            external[link].accumulate(&lf);
        }

        let accel = articulated_forward_dynamics(&self.model_rand, &self.state, &torques, &external)?;

        // Velocity update (explicit), position update with averaged velocity:
        // exact for constant acceleration.
        let rot = self.state.root_orientation.to_rotation_matrix().into_inner();
        let v_body = rot.transpose() * self.state.root_linear_velocity;
        let classical_acc_world = rot
            * (accel.root_linear_accel
                + self.state.root_angular_velocity.cross(&v_body));
        let old_lin = self.state.root_linear_velocity;
        let old_ang = self.state.root_angular_velocity;
        self.state.root_linear_velocity += classical_acc_world * dt;
        self.state.root_angular_velocity += accel.root_angular_accel * dt;
        self.state.root_position += 0.5 * (old_lin + self.state.root_linear_velocity) * dt;
        let omega_mid = 0.5 * (old_ang + self.state.root_angular_velocity);
        let dq = UnitQuaternion::from_scaled_axis(omega_mid * dt);
        self.state.root_orientation = self.state.root_orientation * dq;
        self.state.root_orientation.renormalize();

        for i in 0..self.model.n_dof() {
            let old = self.state.qdot[i];
            self.state.qdot[i] += accel.qddot[i] * dt;
            self.state.q[i] += 0.5 * (old + self.state.qdot[i]) * dt;
        }
        self.state.qddot_last = accel.qddot;

        // Feet contact bookkeeping.
        for (fi, f) in feet_forces.iter().enumerate() {
            let in_contact = f.z > 0.0;
            if in_contact {
                if self.state.feet_air_time[fi] > 0.0 {
                    let prev = info.touchdown_air_time[fi].unwrap_or(0.0);
                    info.touchdown_air_time[fi] = Some(prev.max(self.state.feet_air_time[fi]));
                }
                self.state.feet_air_time[fi] = 0.0;
            } else {
                self.state.feet_air_time[fi] += dt;
            }
        }
        self.state.feet_contact_forces = feet_forces;
        info.torques = torques;
        self.state.sim_time = t + dt;
        Ok(())
    }
}
