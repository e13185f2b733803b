//! Dual-arm coordinated twisting: kinematics, inter-arm collision checks,
//! directional manipulability, configuration selection, the twisted-object
//! model, the task phase machine and master/slave teleoperation.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collision;
pub mod config_opt;
pub mod kinematics;
pub mod manipulability;
pub mod object_model;
pub mod task_engine;
pub mod teleop;
