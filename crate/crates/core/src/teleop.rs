//! Master/slave teleoperation of the left arm.
//!
//! The master device reports a 6-DoF pose, a gripper value and a clutch
//! bit. While the clutch is held, master displacements relative to the
//! pose at engagement are scaled, rotated into the slave frame and applied
//! to the slave's pose at engagement. Releasing the clutch freezes the
//! slave so the operator can re-center the device.
//!
//! Commands can be recorded to and replayed from a plain-text trace with
//! one command per line.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{collision_check, min_arm_distance, ArmSkeleton, SafetyVerdict};
use crate::kinematics::{rpy_quaternion, IkOptions, JointConfig, KinematicChain, Pose};
use crate::manipulability::singularity_measure;

/// First line of every trace file.
pub const TRACE_HEADER: &str = "# tick px py pz qw qx qy qz gripper clutch";

/// Gripper values at or above this count as closed.
pub const GRIPPER_CLOSED: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterCommand {
    pub tick: u64,
    pub pose: Pose,
    /// 0 open, 1 closed.
    pub gripper: f64,
    pub clutch: bool,
}

impl MasterCommand {
    pub fn gripper_closed(&self) -> bool {
        self.gripper >= GRIPPER_CLOSED
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutchAnchor {
    pub master: Pose,
    pub slave: Pose,
}

/// Master-to-slave workspace mapping with clutch indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceMap {
    pub scale: f64,
    /// Rotation from the master device frame into the slave base frame.
    pub rotation: UnitQuaternion<f64>,
    anchor: Option<ClutchAnchor>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TeleopError {
    #[error("invalid workspace mapping: {0}")]
    Mapping(String),
}

impl WorkspaceMap {
    pub fn new(scale: f64, rotation: UnitQuaternion<f64>) -> Result<Self, TeleopError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(TeleopError::Mapping(format!("scale must be positive, got {scale}")));
        }
        Ok(Self {
            scale,
            rotation,
            anchor: None,
        })
    }

    pub fn from_rpy(scale: f64, rpy: [f64; 3]) -> Result<Self, TeleopError> {
        Self::new(scale, rpy_quaternion(rpy))
    }

    pub fn anchor(&self) -> Option<&ClutchAnchor> {
        self.anchor.as_ref()
    }

    pub fn is_engaged(&self) -> bool {
        self.anchor.is_some()
    }

    pub fn engage(&mut self, master: Pose, slave: Pose) {
        self.anchor = Some(ClutchAnchor { master, slave });
    }

    pub fn disengage(&mut self) {
        self.anchor = None;
    }

    /// Slave pose for a master pose; `None` while disengaged.
    pub fn map(&self, master: &Pose) -> Option<Pose> {
        let a = self.anchor.as_ref()?;
        let r = self.rotation;
        let position = a.slave.position + self.scale * (r * (master.position - a.master.position));
        let delta = master.orientation * a.master.orientation.inverse();
        let orientation = r * delta * r.inverse() * a.slave.orientation;
        Some(Pose::new(position, orientation))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MappedTarget {
    /// Clutch released: the slave holds its current configuration.
    NoMotion,
    Target { pose: Pose },
}

/// Applies a command's clutch state to `map` and returns the slave target.
///
/// A rising clutch edge anchors the mapping at the command's master pose
/// and `current_slave`, so the first engaged command never moves the slave.
pub fn map_master_to_slave(cmd: &MasterCommand, map: &mut WorkspaceMap, current_slave: &Pose) -> MappedTarget {
    if !cmd.clutch {
        map.disengage();
        return MappedTarget::NoMotion;
    }
    if !map.is_engaged() {
        map.engage(cmd.pose, *current_slave);
    }
    match map.map(&cmd.pose) {
        Some(pose) => MappedTarget::Target { pose },
        None => MappedTarget::NoMotion,
    }
}

/// Limits a slave configuration must satisfy before it is commanded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandLimits {
    pub max_joint_step: f64,
    pub singularity_floor: f64,
    pub d_thr: f64,
    pub ik: IkOptions,
}

impl Default for CommandLimits {
    fn default() -> Self {
        Self {
            max_joint_step: 0.05,
            singularity_floor: 1e-3,
            d_thr: 0.0,
            ik: IkOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Error)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    #[error("IK did not converge (residual {residual:.3e})")]
    IkFailed { residual: f64 },
    #[error("joint limits exceeded")]
    JointLimits,
    #[error("joint step {step:.4} rad exceeds the per-tick bound")]
    StepTooLarge { step: f64 },
    #[error("near singular (measure {measure:.3e})")]
    Singular { measure: f64 },
    #[error("too close to the other arm (d_min {d_min:.4} m)")]
    Collision { d_min: f64 },
}

/// IK for `target` from `current`, then the safety checks. On any
/// violation the caller keeps `current`.
pub fn slave_target_config(
    target: &Pose,
    current: &JointConfig,
    chain: &KinematicChain,
    limits: &CommandLimits,
    other_arm: &ArmSkeleton,
) -> Result<JointConfig, Rejection> {
    let sol = chain
        .inverse_kinematics(target, current, &limits.ik)
        .map_err(|e| match e {
            crate::kinematics::KinematicsError::Unreachable { residual, .. } => Rejection::IkFailed { residual },
            _ => Rejection::IkFailed { residual: f64::INFINITY },
        })?;
    let q = sol.config;
    if !chain.within_limits(&q) {
        return Err(Rejection::JointLimits);
    }
    let step = q.max_abs_diff(current);
    if step > limits.max_joint_step {
        return Err(Rejection::StepTooLarge { step });
    }
    let jac = chain.jacobian(&q).map_err(|_| Rejection::JointLimits)?;
    let measure = singularity_measure(&jac);
    if measure < limits.singularity_floor {
        return Err(Rejection::Singular { measure });
    }
    let skeleton = ArmSkeleton::new(chain.joint_positions(&q).map_err(|_| Rejection::JointLimits)?);
    if let Ok(report) = min_arm_distance(&skeleton, other_arm, true) {
        if let SafetyVerdict::Unsafe { report } = collision_check(&report, limits.d_thr) {
            return Err(Rejection::Collision { d_min: report.d_min });
        }
    }
    Ok(q)
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_error(line: usize, message: impl Into<String>) -> TraceError {
    TraceError::Parse {
        line,
        message: message.into(),
    }
}

/// One trace line. `f64` debug formatting gives the shortest representation
/// that parses back to the same value, so a write/read round trip is exact.
pub fn format_trace_line(cmd: &MasterCommand) -> String {
    let p = cmd.pose.position;
    let q = cmd.pose.orientation.quaternion();
    let mut s = String::new();
    write!(
        s,
        "{} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {}",
        cmd.tick,
        p.x,
        p.y,
        p.z,
        q.w,
        q.i,
        q.j,
        q.k,
        cmd.gripper,
        u8::from(cmd.clutch)
    )
    .expect("writing to a String");
    s
}

pub fn parse_trace_line(text: &str, line: usize) -> Result<MasterCommand, TraceError> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 10 {
        return Err(parse_error(line, format!("expected 10 fields, found {}", fields.len())));
    }
    let tick = fields[0]
        .parse::<u64>()
        .map_err(|e| parse_error(line, format!("tick: {e}")))?;
    let mut v = [0.0; 8];
    for (slot, field) in v.iter_mut().zip(&fields[1..9]) {
        *slot = field
            .parse::<f64>()
            .map_err(|e| parse_error(line, format!("{field:?}: {e}")))?;
        if !slot.is_finite() {
            return Err(parse_error(line, format!("non-finite value {field:?}")));
        }
    }
    let clutch = match fields[9] {
        "0" => false,
        "1" => true,
        other => return Err(parse_error(line, format!("clutch must be 0 or 1, got {other:?}"))),
    };
    if !(0.0..=1.0).contains(&v[7]) {
        return Err(parse_error(line, format!("gripper {} outside [0, 1]", v[7])));
    }
    let quat = Quaternion::new(v[3], v[4], v[5], v[6]);
    if (quat.norm() - 1.0).abs() > 1e-6 {
        return Err(parse_error(line, format!("quaternion norm {} is not 1", quat.norm())));
    }
    Ok(MasterCommand {
        tick,
        // already unit; avoid renormalizing so values round-trip bit for bit
        pose: Pose::new(Vector3::new(v[0], v[1], v[2]), UnitQuaternion::new_unchecked(quat)),
        gripper: v[7],
        clutch,
    })
}

/// Parses a trace; blank lines and `#` comments are skipped and ticks must
/// be strictly increasing.
pub fn parse_trace(reader: impl BufRead) -> Result<Vec<MasterCommand>, TraceError> {
    let mut out: Vec<MasterCommand> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cmd = parse_trace_line(trimmed, i + 1)?;
        if let Some(prev) = out.last() {
            if cmd.tick <= prev.tick {
                return Err(parse_error(
                    i + 1,
                    format!("tick {} does not follow tick {}", cmd.tick, prev.tick),
                ));
            }
        }
        out.push(cmd);
    }
    Ok(out)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<MasterCommand>, TraceError> {
    let file = std::fs::File::open(path)?;
    parse_trace(std::io::BufReader::new(file))
}

pub fn write_trace(mut writer: impl Write, commands: &[MasterCommand]) -> std::io::Result<()> {
    writeln!(writer, "{TRACE_HEADER}")?;
    for cmd in commands {
        writeln!(writer, "{}", format_trace_line(cmd))?;
    }
    Ok(())
}

/// Streams commands to a trace as they are applied.
pub struct TraceRecorder<W: Write> {
    writer: W,
    last_tick: Option<u64>,
}

impl<W: Write> TraceRecorder<W> {
    pub fn new(mut writer: W) -> std::io::Result<Self> {
        writeln!(writer, "{TRACE_HEADER}")?;
        Ok(Self { writer, last_tick: None })
    }

    pub fn record(&mut self, cmd: &MasterCommand) -> std::io::Result<()> {
        if self.last_tick.is_some_and(|t| cmd.tick <= t) {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("tick {} recorded out of order", cmd.tick),
            ));
        }
        self.last_tick = Some(cmd.tick);
        writeln!(self.writer, "{}", format_trace_line(cmd))
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.writer.flush()
    }

    pub fn into_inner(self) -> W {
        self.writer
    }
}
