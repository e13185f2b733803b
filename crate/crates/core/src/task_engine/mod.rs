//! The coordinated twisting task as a fixed-step phase machine.
//!
//! ```text
//! Initial → GraspRight → Transport → AlignLeft → Twist → Done
//!    └──────────┴───────────┴───────────┴─────────┴──→ Aborted
//! ```
//!
//! The right arm follows planned motion: it approaches and closes on P₁,
//! lifts the object to the hold pose at P_S and, once twisting starts,
//! rotates about its own z axis toward θ_R. The left arm is teleoperated
//! (or, during Twist, optionally follows a mirrored plan). Every tick the
//! engine drains the commands handed to it, moves the arms, updates the
//! object, recomputes the metrics and then applies the gates: the safety
//! gate first, then the phase transitions.

mod plan;
mod scenario;

pub use plan::{rotation_about, step_toward, twist_progress, LinearPath};
pub use scenario::{
    ArmsSection, LeftTwistSource, ObjectSection, OptimizerSection, Scenario, ScenarioError, TaskSection, TaskSetup,
    TeleopSection, TwistPlan,
};

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{min_arm_distance, ArmSkeleton, CollisionError};
use crate::kinematics::{JointConfig, KinematicChain, KinematicsError, Pose};
use crate::manipulability::{manipulability_fitness, twist_manipulability};
use crate::object_model::{
    alignment_error, angle_between, update_object, AlignmentVariant, Grasp, ObjectError, TwistObject,
};
use crate::teleop::{
    map_master_to_slave, slave_target_config, CommandLimits, MappedTarget, MasterCommand, Rejection, TeleopError,
    WorkspaceMap, GRIPPER_CLOSED,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initial,
    GraspRight,
    Transport,
    AlignLeft,
    Twist,
    Done,
    Aborted,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Aborted)
    }

    /// Edges of the phase graph.
    pub fn can_transition_to(self, next: Phase) -> bool {
        use Phase::*;
        match (self, next) {
            (from, Aborted) => !from.is_terminal(),
            (Initial, GraspRight) | (GraspRight, Transport) | (Transport, AlignLeft) | (AlignLeft, Twist) | (Twist, Done) => true,
            _ => false,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Initial => "initial",
            Phase::GraspRight => "grasp_right",
            Phase::Transport => "transport",
            Phase::AlignLeft => "align_left",
            Phase::Twist => "twist",
            Phase::Done => "done",
            Phase::Aborted => "aborted",
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub delta_deg: f64,
    pub alignment: AlignmentVariant,
    pub d_min: f64,
    pub closest_pair: (usize, usize),
    pub witness_left: Vector3<f64>,
    pub witness_right: Vector3<f64>,
    pub theta_t_deg: f64,
    pub theta_left_deg: f64,
    pub theta_right_deg: f64,
    pub m_left: f64,
    pub m_right: f64,
    /// Absent when either arm is singular about its twist axis.
    pub f_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum AbortReason {
    Collision { d_min: f64, d_thr: f64 },
    Overstretch { distance: f64, length: f64 },
    Unreachable { phase: Phase, residual: f64 },
    GraspMissed { position_error: f64, angle_deg: f64 },
    AlignTimeout { ticks: u64 },
    Geometry { message: String },
}

impl std::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AbortReason::Collision { d_min, d_thr } => write!(f, "arms too close: d_min {d_min:.4} m < d_thr {d_thr:.4} m"),
            AbortReason::Overstretch { distance, length } => {
                write!(f, "object overstretched: {distance:.4} m between ends, length {length:.4} m")
            }
            AbortReason::Unreachable { phase, residual } => {
                write!(f, "right arm cannot follow its plan in {phase} (residual {residual:.3e})")
            }
            AbortReason::GraspMissed { position_error, angle_deg } => {
                write!(f, "right grasp missed by {position_error:.4} m / {angle_deg:.2} deg")
            }
            AbortReason::AlignTimeout { ticks } => write!(f, "alignment not reached within {ticks} ticks"),
            AbortReason::Geometry { message } => write!(f, "degenerate geometry: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskState {
    pub phase: Phase,
    pub tick: u64,
    pub metrics: Metrics,
    pub abort: Option<AbortReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub left: JointConfig,
    pub right: JointConfig,
    pub left_gripper: f64,
    pub right_gripper_closed: bool,
    pub object: TwistObject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TaskCommand {
    Teleop(MasterCommand),
    Lift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum CommandVerdict {
    Applied,
    /// Clutch released; the left arm holds.
    Held,
    Rejected { rejection: Rejection },
    WrongPhase { phase: Phase },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TaskEvent {
    PhaseChanged { from: Phase, to: Phase },
    Grasped { end: usize, by: Grasp },
    GraspMissed { end: usize, position_error: f64, angle_deg: f64 },
    Released { end: usize },
    /// A mirrored left twist step failed validation; the arm held.
    LeftPlanHeld { rejection: Rejection },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub tick: u64,
    pub from: Phase,
    pub to: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub tick: u64,
    pub verdicts: Vec<CommandVerdict>,
    pub events: Vec<TaskEvent>,
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Object(#[from] ObjectError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error(transparent)]
    Teleop(#[from] TeleopError),
}

#[derive(Debug, Clone, PartialEq)]
struct TwistTracker {
    axis: Vector3<f64>,
    right_entry: Pose,
    left_entry: Pose,
    prev_right: UnitQuaternion<f64>,
    prev_left: UnitQuaternion<f64>,
    theta_right: f64,
    theta_left: f64,
    cmd_right: f64,
    cmd_left: f64,
}

pub fn skeleton(chain: &KinematicChain, q: &JointConfig) -> Result<ArmSkeleton, KinematicsError> {
    Ok(ArmSkeleton::new(chain.joint_positions(q)?))
}

/// Recomputes every metric from the world; `theta_*` are the accumulated
/// gripper rotations about the twist axis (zero outside Twist).
pub fn compute_metrics(
    setup: &TaskSetup,
    world: &World,
    theta_left_deg: f64,
    theta_right_deg: f64,
) -> Result<Metrics, TaskError> {
    let left_pose = setup.left.forward_kinematics(&world.left)?;
    let right_pose = setup.right.forward_kinematics(&world.right)?;
    let report = min_arm_distance(
        &skeleton(&setup.left, &world.left)?,
        &skeleton(&setup.right, &world.right)?,
        true,
    )?;
    let variant = AlignmentVariant::for_stiffness(world.object.stiffness);
    let reference = alignment_reference(&world.object, &left_pose, &right_pose)?;
    let delta_deg = alignment_error(&right_pose, &left_pose, &reference, variant)?.degrees;
    let m_left = twist_manipulability(&setup.left.jacobian(&world.left)?, &left_pose).value;
    let m_right = twist_manipulability(&setup.right.jacobian(&world.right)?, &right_pose).value;
    let f_m = manipulability_fitness(m_left, m_right, &setup.scenario.optimizer.beta)
        .ok()
        .map(|f| f.f_m);
    Ok(Metrics {
        delta_deg,
        alignment: variant,
        d_min: report.d_min,
        closest_pair: report.closest_pair,
        witness_left: report.witness_left,
        witness_right: report.witness_right,
        theta_t_deg: twist_progress(theta_right_deg, theta_left_deg),
        theta_left_deg,
        theta_right_deg,
        m_left,
        m_right,
        f_m,
    })
}

/// Object whose axis the stiff-object alignment compares against. With both
/// ends held the modeled axis is the grip line itself, so the comparison
/// uses the axis a stiff object keeps when carried by the right gripper
/// alone.
fn alignment_reference(obj: &TwistObject, left: &Pose, right: &Pose) -> Result<TwistObject, ObjectError> {
    if !obj.is_stiff() || obj.grasped_count() < 2 || obj.ends[0].grasp != Grasp::Right {
        return Ok(obj.clone());
    }
    let mut carried = obj.clone();
    carried.ends[1].grasp = Grasp::Free;
    update_object(&carried, left, right, f64::INFINITY)
}

/// The twisting task: world state, phase machine and audit trail.
#[derive(Debug, Clone)]
pub struct TaskEngine {
    setup: TaskSetup,
    state: TaskState,
    world: World,
    map: WorkspaceMap,
    path: Vec<Pose>,
    path_index: usize,
    phase_ticks: u64,
    lift_requested: bool,
    twist: Option<TwistTracker>,
    transitions: Vec<Transition>,
}

impl TaskEngine {
    pub fn new(setup: TaskSetup) -> Result<Self, TaskError> {
        let s = &setup.scenario;
        let object = TwistObject::new(s.object.length, s.object.stiffness, s.p1(), &s.object_axis())?;
        let world = World {
            left: s.arms.left_home.clone(),
            right: s.arms.right_home.clone(),
            left_gripper: 0.0,
            right_gripper_closed: false,
            object,
        };
        let map = WorkspaceMap::from_rpy(s.teleop.scale, s.teleop.rpy)?;
        let path = approach_path(&setup, &world.right)?;
        let metrics = compute_metrics(&setup, &world, 0.0, 0.0)?;
        Ok(Self {
            state: TaskState {
                phase: Phase::Initial,
                tick: 0,
                metrics,
                abort: None,
            },
            world,
            map,
            path,
            path_index: 0,
            phase_ticks: 0,
            lift_requested: false,
            twist: None,
            transitions: Vec::new(),
            setup,
        })
    }

    pub fn setup(&self) -> &TaskSetup {
        &self.setup
    }

    pub fn scenario(&self) -> &Scenario {
        &self.setup.scenario
    }

    pub fn state(&self) -> &TaskState {
        &self.state
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn tick(&self) -> u64 {
        self.state.tick
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    /// Every phase change so far, in order.
    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn clutch_engaged(&self) -> bool {
        self.map.is_engaged()
    }

    /// Forces the clutch open, e.g. when the operator disconnects.
    pub fn release_clutch(&mut self) {
        self.map.disengage();
    }

    pub fn left_pose(&self) -> Pose {
        self.setup.left.forward_kinematics(&self.world.left).expect("validated config")
    }

    pub fn right_pose(&self) -> Pose {
        self.setup.right.forward_kinematics(&self.world.right).expect("validated config")
    }

    pub fn skeletons(&self) -> (ArmSkeleton, ArmSkeleton) {
        (
            skeleton(&self.setup.left, &self.world.left).expect("validated config"),
            skeleton(&self.setup.right, &self.world.right).expect("validated config"),
        )
    }

    fn d_thr(&self) -> f64 {
        self.setup.scenario.d_thr()
    }

    fn command_limits(&self) -> CommandLimits {
        let s = &self.setup.scenario;
        CommandLimits {
            max_joint_step: s.teleop.max_joint_step,
            singularity_floor: s.teleop.singularity_floor,
            d_thr: s.d_thr(),
            ik: s.ik,
        }
    }

    /// End-effector target of the right arm for the next tick, if it moves.
    pub fn right_arm_target(&self) -> Option<Pose> {
        match self.state.phase {
            Phase::Initial | Phase::Transport => self.path.get(self.path_index).copied(),
            Phase::Twist => {
                let tr = self.twist.as_ref()?;
                let plan = &self.setup.scenario.twist;
                let cmd = step_toward(tr.cmd_right, plan.theta_r_deg, plan.rate_deg);
                Some(tr.right_entry.rotated_about_local_z(cmd.to_radians()))
            }
            _ => None,
        }
    }

    /// Right arm joint target for the next tick; `Ok(None)` when it holds.
    pub fn right_arm_plan(&self) -> Result<Option<JointConfig>, AbortReason> {
        let Some(target) = self.right_arm_target() else {
            return Ok(None);
        };
        self.setup
            .right
            .inverse_kinematics(&target, &self.world.right, &self.setup.scenario.ik)
            .map(|sol| Some(sol.config))
            .map_err(|e| AbortReason::Unreachable {
                phase: self.state.phase,
                residual: match e {
                    KinematicsError::Unreachable { residual, .. } => residual,
                    _ => f64::INFINITY,
                },
            })
    }

    /// Advances one tick.
    pub fn step(&mut self, commands: &[TaskCommand]) -> StepReport {
        let phase = self.state.phase;
        if phase.is_terminal() {
            return StepReport {
                tick: self.state.tick,
                verdicts: commands.iter().map(|_| CommandVerdict::WrongPhase { phase }).collect(),
                events: Vec::new(),
            };
        }
        self.state.tick += 1;
        self.phase_ticks += 1;
        let mut events = Vec::new();
        let verdicts = commands.iter().map(|c| self.apply_command(c, &mut events)).collect();

        let outcome = self.advance(&mut events).and_then(|()| self.refresh_metrics());
        match outcome {
            Err(reason) => {
                // keep the metrics current where the geometry still allows it
                let _ = self.refresh_metrics();
                self.abort(reason, &mut events);
            }
            Ok(()) if self.state.metrics.d_min < self.d_thr() => {
                let reason = AbortReason::Collision {
                    d_min: self.state.metrics.d_min,
                    d_thr: self.d_thr(),
                };
                self.abort(reason, &mut events);
            }
            Ok(()) => {
                if let Err(reason) = self.apply_transitions(&mut events) {
                    self.abort(reason, &mut events);
                }
            }
        }
        StepReport {
            tick: self.state.tick,
            verdicts,
            events,
        }
    }

    fn apply_command(&mut self, cmd: &TaskCommand, events: &mut Vec<TaskEvent>) -> CommandVerdict {
        let phase = self.state.phase;
        match cmd {
            TaskCommand::Lift if phase == Phase::GraspRight => {
                self.lift_requested = true;
                CommandVerdict::Applied
            }
            TaskCommand::Lift => CommandVerdict::WrongPhase { phase },
            TaskCommand::Teleop(mc) => {
                let teleop_twist = self.setup.scenario.twist.left == LeftTwistSource::Teleop;
                if !(phase == Phase::AlignLeft || (phase == Phase::Twist && teleop_twist)) {
                    return CommandVerdict::WrongPhase { phase };
                }
                let verdict = self.teleop(mc);
                self.update_left_gripper(mc.gripper, events);
                verdict
            }
        }
    }

    fn teleop(&mut self, mc: &MasterCommand) -> CommandVerdict {
        let current = self.left_pose();
        match map_master_to_slave(mc, &mut self.map, &current) {
            MappedTarget::NoMotion => CommandVerdict::Held,
            MappedTarget::Target { pose } => {
                let (_, right) = self.skeletons();
                match slave_target_config(&pose, &self.world.left, &self.setup.left, &self.command_limits(), &right) {
                    Ok(q) => {
                        self.world.left = q;
                        CommandVerdict::Applied
                    }
                    Err(rejection) => CommandVerdict::Rejected { rejection },
                }
            }
        }
    }

    /// Grasp on a rising gripper edge, release on a falling one; only
    /// during alignment; once twisting, the grasp is kept.
    fn update_left_gripper(&mut self, value: f64, events: &mut Vec<TaskEvent>) {
        let was_closed = self.world.left_gripper >= GRIPPER_CLOSED;
        let closed = value >= GRIPPER_CLOSED;
        self.world.left_gripper = value;
        if self.state.phase != Phase::AlignLeft || closed == was_closed {
            return;
        }
        let end = &mut self.world.object.ends[1];
        if closed && end.grasp == Grasp::Free {
            let pose = self.left_pose();
            let task = &self.setup.scenario.task;
            let position_error = (pose.position - self.world.object.p2()).norm();
            let axis = self.world.object.axis();
            let angle_deg = angle_between(&pose.z_axis(), &axis).unwrap_or(180.0);
            if position_error <= task.grasp_position_tol && angle_deg <= task.grasp_angle_tol_deg {
                self.world.object.ends[1].grasp = Grasp::Left;
                events.push(TaskEvent::Grasped { end: 1, by: Grasp::Left });
            } else {
                events.push(TaskEvent::GraspMissed {
                    end: 1,
                    position_error,
                    angle_deg,
                });
            }
        } else if !closed && end.grasp == Grasp::Left {
            end.grasp = Grasp::Free;
            events.push(TaskEvent::Released { end: 1 });
        }
    }

    fn move_right(&mut self) -> Result<(), AbortReason> {
        if let Some(q) = self.right_arm_plan()? {
            self.world.right = q;
        }
        Ok(())
    }

    fn advance(&mut self, events: &mut Vec<TaskEvent>) -> Result<(), AbortReason> {
        match self.state.phase {
            Phase::Initial | Phase::Transport => {
                self.move_right()?;
                self.path_index = (self.path_index + 1).min(self.path.len());
                if self.state.phase == Phase::Initial && self.path_index == self.path.len() {
                    self.close_right(events)?;
                }
            }
            Phase::Twist => {
                self.move_right()?;
                let plan = self.setup.scenario.twist;
                let tr = self.twist.as_mut().expect("twist tracker set on entry");
                tr.cmd_right = step_toward(tr.cmd_right, plan.theta_r_deg, plan.rate_deg);
                if plan.left == LeftTwistSource::Mirrored {
                    self.mirrored_left(events);
                }
            }
            _ => {}
        }
        let left = self.left_pose();
        let right = self.right_pose();
        self.world.object = update_object(&self.world.object, &left, &right, self.setup.scenario.task.overstretch_tol)
            .map_err(|e| match e {
                ObjectError::Overstretch { distance, length } => AbortReason::Overstretch { distance, length },
                other => AbortReason::Geometry {
                    message: other.to_string(),
                },
            })?;
        if let Some(tr) = self.twist.as_mut() {
            tr.theta_right += rotation_about(&tr.prev_right, &right.orientation, &tr.axis);
            tr.theta_left += rotation_about(&tr.prev_left, &left.orientation, &tr.axis);
            tr.prev_right = right.orientation;
            tr.prev_left = left.orientation;
        }
        Ok(())
    }

    fn mirrored_left(&mut self, events: &mut Vec<TaskEvent>) {
        let plan = self.setup.scenario.twist;
        let limits = self.command_limits();
        let (_, right) = self.skeletons();
        let tr = self.twist.as_mut().expect("twist tracker set on entry");
        let goal = plan.theta_l_deg + plan.completion_margin_deg * (plan.theta_l_deg - plan.theta_r_deg).signum();
        let cmd = step_toward(tr.cmd_left, goal, plan.rate_deg);
        let target = tr.left_entry.rotated_about_local_z(cmd.to_radians());
        match slave_target_config(&target, &self.world.left, &self.setup.left, &limits, &right) {
            Ok(q) => {
                self.world.left = q;
                tr.cmd_left = cmd;
            }
            Err(rejection) => events.push(TaskEvent::LeftPlanHeld { rejection }),
        }
    }

    fn close_right(&mut self, events: &mut Vec<TaskEvent>) -> Result<(), AbortReason> {
        let s = &self.setup.scenario;
        let pose = self.right_pose();
        let position_error = (pose.position - self.world.object.p1()).norm();
        let angle_deg = angle_between(&pose.z_axis(), &self.world.object.axis()).unwrap_or(180.0);
        if position_error > s.task.grasp_position_tol || angle_deg > s.task.grasp_angle_tol_deg {
            return Err(AbortReason::GraspMissed {
                position_error,
                angle_deg,
            });
        }
        self.world.right_gripper_closed = true;
        let end = &mut self.world.object.ends[0];
        end.grasp = Grasp::Right;
        end.grasp_tilt = s.object.grasp_tilt_deg.to_radians();
        events.push(TaskEvent::Grasped { end: 0, by: Grasp::Right });
        Ok(())
    }

    fn refresh_metrics(&mut self) -> Result<(), AbortReason> {
        let (tl, tr) = self.twist.as_ref().map_or((0.0, 0.0), |t| (t.theta_left, t.theta_right));
        self.state.metrics = compute_metrics(&self.setup, &self.world, tl, tr).map_err(|e| AbortReason::Geometry {
            message: e.to_string(),
        })?;
        Ok(())
    }

    fn apply_transitions(&mut self, events: &mut Vec<TaskEvent>) -> Result<(), AbortReason> {
        let s = &self.setup.scenario;
        let next = match self.state.phase {
            Phase::Initial if self.world.object.ends[0].grasp == Grasp::Right => Some(Phase::GraspRight),
            Phase::GraspRight => {
                let auto = s.task.auto_lift_ticks.is_some_and(|n| self.phase_ticks >= n);
                (self.lift_requested || auto).then_some(Phase::Transport)
            }
            Phase::Transport if self.path_index == self.path.len() => {
                let miss = (self.world.object.p1() - s.hold_position()).norm();
                if miss > s.task.grasp_position_tol {
                    return Err(AbortReason::Unreachable {
                        phase: Phase::Transport,
                        residual: miss,
                    });
                }
                Some(Phase::AlignLeft)
            }
            Phase::AlignLeft => {
                let grasped = self.world.object.ends[1].grasp == Grasp::Left;
                if grasped && self.state.metrics.delta_deg <= s.task.delta_tor_deg {
                    Some(Phase::Twist)
                } else if let Some(limit) = s.task.align_timeout_ticks.filter(|n| self.phase_ticks >= *n) {
                    return Err(AbortReason::AlignTimeout { ticks: limit });
                } else {
                    None
                }
            }
            Phase::Twist if self.state.metrics.theta_t_deg >= s.twist.theta_t_deg => Some(Phase::Done),
            _ => None,
        };
        if let Some(next) = next {
            self.enter(next, events)?;
        }
        Ok(())
    }

    fn enter(&mut self, next: Phase, events: &mut Vec<TaskEvent>) -> Result<(), AbortReason> {
        match next {
            Phase::Transport => {
                let task = &self.setup.scenario.task;
                let path = LinearPath::new(
                    self.right_pose(),
                    self.setup.scenario.hold_pose(),
                    task.linear_step,
                    task.angular_step_deg.to_radians(),
                );
                self.path = path.waypoints();
                self.path_index = 0;
            }
            Phase::Twist => {
                let right = self.right_pose();
                let left = self.left_pose();
                self.twist = Some(TwistTracker {
                    axis: right.z_axis(),
                    right_entry: right,
                    left_entry: left,
                    prev_right: right.orientation,
                    prev_left: left.orientation,
                    theta_right: 0.0,
                    theta_left: 0.0,
                    cmd_right: 0.0,
                    cmd_left: 0.0,
                });
            }
            _ => {}
        }
        self.record_transition(next, events);
        Ok(())
    }

    fn record_transition(&mut self, next: Phase, events: &mut Vec<TaskEvent>) {
        let from = self.state.phase;
        debug_assert!(from.can_transition_to(next), "{from} -> {next}");
        self.transitions.push(Transition {
            tick: self.state.tick,
            from,
            to: next,
        });
        events.push(TaskEvent::PhaseChanged { from, to: next });
        self.state.phase = next;
        self.phase_ticks = 0;
    }

    fn abort(&mut self, reason: AbortReason, events: &mut Vec<TaskEvent>) {
        self.state.abort = Some(reason);
        self.record_transition(Phase::Aborted, events);
    }
}

/// Right-arm approach: from the home pose to a point backed off from P₁
/// along the object axis, then straight in.
fn approach_path(setup: &TaskSetup, right_home: &JointConfig) -> Result<Vec<Pose>, TaskError> {
    let s = &setup.scenario;
    let start = setup.right.forward_kinematics(right_home)?;
    let grasp = s.grasp_pose();
    let pre = Pose::new(grasp.position - s.object_axis() * s.task.approach_offset, grasp.orientation);
    let (lin, ang) = (s.task.linear_step, s.task.angular_step_deg.to_radians());
    let mut out = LinearPath::new(start, pre, lin, ang).waypoints();
    out.extend(LinearPath::new(pre, grasp, lin, ang).waypoints());
    Ok(out)
}
