//! Session configuration and the state snapshot published every tick.

use std::path::PathBuf;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use twistarm::kinematics::Pose;
use twistarm::object_model::Grasp;
use twistarm::task_engine::{AbortReason, CommandVerdict, Metrics, Phase, TaskEngine};

use crate::protocol::PROTOCOL_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Headless,
    Interactive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub mode: Mode,
    pub scenario: PathBuf,
    pub left_arm: Option<PathBuf>,
    pub right_arm: Option<PathBuf>,
    /// Overrides the scenario's trace.
    pub trace: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub metrics_out: Option<PathBuf>,
    pub listen: String,
    pub tick_rate: f64,
    /// Ticks to keep running once the trace is exhausted.
    pub settle_ticks: u64,
    pub max_ticks: u64,
}

pub const DEFAULT_HEADLESS_RATE: f64 = 50.0;
pub const DEFAULT_INTERACTIVE_RATE: f64 = 20.0;
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8765";

impl SessionConfig {
    pub fn new(mode: Mode, scenario: impl Into<PathBuf>) -> Self {
        Self {
            mode,
            scenario: scenario.into(),
            left_arm: None,
            right_arm: None,
            trace: None,
            record: None,
            metrics_out: None,
            listen: DEFAULT_LISTEN.to_string(),
            tick_rate: match mode {
                Mode::Headless => DEFAULT_HEADLESS_RATE,
                Mode::Interactive => DEFAULT_INTERACTIVE_RATE,
            },
            settle_ticks: 100,
            max_ticks: 20_000,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tick_rate > 0.0 && self.tick_rate.is_finite()) {
            return Err(format!("tick rate must be positive, got {}", self.tick_rate));
        }
        if self.max_ticks == 0 {
            return Err("max_ticks must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub joints: Vec<f64>,
    /// Joint positions, base to end-effector.
    pub points: Vec<Vector3<f64>>,
    pub ee: Pose,
    pub gripper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub p1: Vector3<f64>,
    pub p2: Vector3<f64>,
    pub axis: Vector3<f64>,
    pub length: f64,
    pub stiffness: f64,
    pub grasp: [Grasp; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub d_thr: f64,
    pub delta_tor_deg: f64,
    pub theta_t_target_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub v: u32,
    pub tick: u64,
    pub phase: Phase,
    pub left: ArmState,
    pub right: ArmState,
    pub object: ObjectState,
    pub metrics: Metrics,
    pub limits: Limits,
    pub clutch: bool,
    pub last_verdict: Option<CommandVerdict>,
    pub abort: Option<AbortReason>,
}

impl StateSnapshot {
    pub fn capture(engine: &TaskEngine, last_verdict: Option<CommandVerdict>) -> Self {
        let w = engine.world();
        let s = engine.scenario();
        let (left_sk, right_sk) = engine.skeletons();
        let state = engine.state();
        Self {
            v: PROTOCOL_VERSION,
            tick: state.tick,
            phase: state.phase,
            left: ArmState {
                joints: w.left.as_slice().to_vec(),
                points: left_sk.points,
                ee: engine.left_pose(),
                gripper: w.left_gripper,
            },
            right: ArmState {
                joints: w.right.as_slice().to_vec(),
                points: right_sk.points,
                ee: engine.right_pose(),
                gripper: if w.right_gripper_closed { 1.0 } else { 0.0 },
            },
            object: ObjectState {
                p1: w.object.p1(),
                p2: w.object.p2(),
                axis: w.object.axis(),
                length: w.object.length,
                stiffness: w.object.stiffness,
                grasp: [w.object.ends[0].grasp, w.object.ends[1].grasp],
            },
            metrics: state.metrics.clone(),
            limits: Limits {
                d_thr: s.d_thr(),
                delta_tor_deg: s.task.delta_tor_deg,
                theta_t_target_deg: s.twist.theta_t_deg,
            },
            clutch: engine.clutch_engaged(),
            last_verdict,
            abort: state.abort.clone(),
        }
    }
}
