//! Serial-chain kinematics: forward kinematics, joint positions, geometric
//! Jacobian and damped-least-squares inverse kinematics.
//!
//! A chain is a list of revolute joints, each described by its rotation
//! axis and the fixed transform to the next joint, mounted at a base frame
//! in the world. All functions are pure.

mod chain;
mod ik;
mod pose;

pub use chain::{ChainFile, FrameSpec, Jacobian, Joint, JointConfig, JointSpec, KinematicChain};
pub use ik::{IkOptions, IkSolution};
pub use pose::{rpy_quaternion, Pose, ORIENTATION_WEIGHT};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KinematicsError {
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("expected {expected} joint values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("target unreachable (best residual {residual:.3e})")]
    Unreachable { residual: f64, best: JointConfig },
}
