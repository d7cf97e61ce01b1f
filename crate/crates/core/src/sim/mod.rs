//! Deterministic floating-base articulated rigid-body simulation: kinematic
//! tree models, O(n) forward dynamics, penalty contacts, PD control with
//! action delay, domain randomization, and push perturbations.

pub mod contact;
pub mod dynamics;
pub mod fk;
pub mod model;
pub mod randomize;
pub mod state;
pub mod step;
pub mod trajectory;

pub use contact::{contact_forces, Terrain, TerrainKind};
pub use dynamics::{articulated_forward_dynamics, gravity_forces, LinkForce};
pub use fk::{forward_kinematics, projected_gravity, standing_root_height, BodyPoses};
pub use model::{build_default_humanoid, BodyGroup, JointSpec, PDGains, RobotModel};
pub use randomize::{
    apply_randomization, sample_randomization, RandomizationRanges, RandomizationSample,
};
pub use state::FloatingBaseState;
pub use step::{pd_torques, SimConfig, Simulator, StepInfo};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid model: {0}")]
    BadModel(String),
    #[error("singular articulated inertia at link {0}")]
    SingularInertia(usize),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("state became non-finite during integration")]
    NonFiniteState,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
