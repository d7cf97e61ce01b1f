//! Whole-body control sandbox: a floating-base humanoid simulator, dual
//! policy networks (memory-transformer lower body, MLP upper body), a
//! synthetic motion retargeting pipeline, the PPO curriculum that trains the
//! controllers, and the evaluation harness.

pub mod nn;
pub mod sim;

pub use nn::{ParamStore, Tape};
pub use sim::{RobotModel, Simulator};
