//! Kinematic model of the twisted object and the alignment-error metrics.
//!
//! The object is a straight segment `P₁P₂` of nominal length `L`. A grasped
//! end rides exactly on its gripper. With one end grasped the free end
//! droops under gravity by `δ_c = (1 − s)·90°·cos(elevation)`, where `s` is
//! the stiffness (1 rigid, 0 soft) and `elevation` the angle of the grasped
//! axis above the horizontal. With both ends grasped the object axis is
//! simply `P₁P₂`, which may be slack but never longer than `L`.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::Pose;

/// Stiffness at or above which the object is treated as stiff for alignment.
pub const STIFF_THRESHOLD: f64 = 0.7;
pub const MIN_VECTOR_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ObjectError {
    #[error("degenerate geometry: {0}")]
    Degenerate(&'static str),
    #[error("object state error: {0}")]
    State(String),
    #[error("object overstretched: ends {distance:.4} m apart, length {length:.4} m")]
    Overstretch { distance: f64, length: f64 },
    #[error("invalid object parameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grasp {
    Free,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectEnd {
    pub point: Vector3<f64>,
    pub grasp: Grasp,
    /// Misgrasp: tilt of the object axis relative to the gripper z axis,
    /// about the gripper x axis (radians). Only meaningful while grasped.
    #[serde(default)]
    pub grasp_tilt: f64,
}

impl ObjectEnd {
    pub fn free(point: Vector3<f64>) -> Self {
        Self {
            point,
            grasp: Grasp::Free,
            grasp_tilt: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistObject {
    pub length: f64,
    pub stiffness: f64,
    /// `ends[0]` is P₁, `ends[1]` is P₂.
    pub ends: [ObjectEnd; 2],
}

impl TwistObject {
    /// Object lying straight from `p1` along `axis`, nothing grasped.
    pub fn new(length: f64, stiffness: f64, p1: Vector3<f64>, axis: &Vector3<f64>) -> Result<Self, ObjectError> {
        if !(length > 0.0) {
            return Err(ObjectError::Invalid(format!("length must be positive, got {length}")));
        }
        if !(0.0..=1.0).contains(&stiffness) {
            return Err(ObjectError::Invalid(format!("stiffness must lie in [0, 1], got {stiffness}")));
        }
        if axis.norm() < MIN_VECTOR_NORM {
            return Err(ObjectError::Degenerate("object axis is a zero vector"));
        }
        let p2 = p1 + axis.normalize() * length;
        Ok(Self {
            length,
            stiffness,
            ends: [ObjectEnd::free(p1), ObjectEnd::free(p2)],
        })
    }

    pub fn p1(&self) -> Vector3<f64> {
        self.ends[0].point
    }

    pub fn p2(&self) -> Vector3<f64> {
        self.ends[1].point
    }

    /// Vector P₁P₂.
    pub fn axis(&self) -> Vector3<f64> {
        self.p2() - self.p1()
    }

    pub fn end_held_by(&self, who: Grasp) -> Option<usize> {
        self.ends.iter().position(|e| e.grasp == who)
    }

    pub fn grasped_count(&self) -> usize {
        self.ends.iter().filter(|e| e.grasp != Grasp::Free).count()
    }

    pub fn is_stiff(&self) -> bool {
        self.stiffness >= STIFF_THRESHOLD
    }

    /// Unit P₁P₂: the z axis a gripper must match to grasp either end.
    pub fn unit_axis(&self) -> Result<Vector3<f64>, ObjectError> {
        let axis = self.axis();
        if axis.norm() < MIN_VECTOR_NORM {
            return Err(ObjectError::Degenerate("object ends coincide"));
        }
        Ok(axis.normalize())
    }
}

/// Angle between two vectors in degrees, in `[0, 180]`.
pub fn angle_between(u: &Vector3<f64>, v: &Vector3<f64>) -> Result<f64, ObjectError> {
    let (nu, nv) = (u.norm(), v.norm());
    if nu <= MIN_VECTOR_NORM || nv <= MIN_VECTOR_NORM {
        return Err(ObjectError::Degenerate("angle with a zero-length vector"));
    }
    let c = (u.dot(v) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(c.acos().to_degrees())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentVariant {
    /// Right gripper axis against the object axis.
    AxisToObject,
    /// Gripper-to-gripper line against the object axis (stiff objects).
    GripLineToObject,
    /// Right gripper axis against left gripper axis (deformable objects).
    AxisToAxis,
}

impl AlignmentVariant {
    pub fn for_stiffness(stiffness: f64) -> Self {
        if stiffness >= STIFF_THRESHOLD {
            AlignmentVariant::GripLineToObject
        } else {
            AlignmentVariant::AxisToAxis
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentError {
    pub degrees: f64,
    pub variant: AlignmentVariant,
}

/// Twist-axis alignment error. The grip line is taken from the gripper on
/// P₁ (the right arm) to the gripper on P₂ so that the ideal grasp reads 0°
/// like the other two variants.
pub fn alignment_error(
    right_ee: &Pose,
    left_ee: &Pose,
    obj: &TwistObject,
    variant: AlignmentVariant,
) -> Result<AlignmentError, ObjectError> {
    let degrees = match variant {
        AlignmentVariant::AxisToObject => angle_between(&right_ee.z_axis(), &obj.axis())?,
        AlignmentVariant::GripLineToObject => {
            angle_between(&(left_ee.position - right_ee.position), &obj.axis())?
        }
        AlignmentVariant::AxisToAxis => angle_between(&right_ee.z_axis(), &left_ee.z_axis())?,
    };
    Ok(AlignmentError { degrees, variant })
}

/// Direction in which the object leaves the gripper holding end `index`,
/// including any misgrasp tilt. Tool z axes run along P₁P₂, so the object
/// continues along +z from P₁ and along −z from P₂.
fn outward_axis(pose: &Pose, end: &ObjectEnd, index: usize) -> Vector3<f64> {
    let tilt = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), end.grasp_tilt);
    let z = (pose.orientation * tilt) * Vector3::z();
    if index == 0 {
        z
    } else {
        -z
    }
}

fn elevation(dir: &Vector3<f64>) -> f64 {
    let horizontal = (dir.x * dir.x + dir.y * dir.y).sqrt();
    dir.z.atan2(horizontal)
}

/// Droop of the free end (degrees) and its unit direction from the held end.
fn droop(stiffness: f64, axis: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let axis = axis.normalize();
    let elev = elevation(&axis);
    let nominal = (1.0 - stiffness) * std::f64::consts::FRAC_PI_2 * elev.cos();
    // cannot hang past vertical
    let applied = nominal.min(elev + std::f64::consts::FRAC_PI_2).max(0.0);
    let horizontal = Vector3::new(axis.x, axis.y, 0.0);
    if horizontal.norm() < MIN_VECTOR_NORM || applied == 0.0 {
        return (applied.to_degrees(), axis);
    }
    let h = horizontal.normalize();
    let e = elev - applied;
    (applied.to_degrees(), h * e.cos() + Vector3::z() * e.sin())
}

/// Droop angle of the free end when exactly one end is grasped; the pose
/// is that of the gripper holding the grasped end.
pub fn pendent_angle(obj: &TwistObject, grasped_end_pose: &Pose) -> Result<f64, ObjectError> {
    let held = single_grasped(obj)?;
    let out = outward_axis(grasped_end_pose, &obj.ends[held], held);
    Ok(droop(obj.stiffness, &out).0)
}

fn single_grasped(obj: &TwistObject) -> Result<usize, ObjectError> {
    match obj.grasped_count() {
        1 => Ok(obj.ends.iter().position(|e| e.grasp != Grasp::Free).expect("one grasped")),
        n => Err(ObjectError::State(format!("pendent model needs exactly one grasped end, {n} grasped"))),
    }
}

/// Moves the object with the grippers. Grasped ends are placed exactly at
/// their gripper positions; a single free end hangs per the droop model.
pub fn update_object(
    obj: &TwistObject,
    left_ee: &Pose,
    right_ee: &Pose,
    overstretch_tol: f64,
) -> Result<TwistObject, ObjectError> {
    let mut next = obj.clone();
    let pose_of = |g: Grasp| match g {
        Grasp::Left => Some(left_ee),
        Grasp::Right => Some(right_ee),
        Grasp::Free => None,
    };
    for end in next.ends.iter_mut() {
        if let Some(pose) = pose_of(end.grasp) {
            end.point = pose.position;
        }
    }
    match next.grasped_count() {
        1 => {
            let held = single_grasped(&next)?;
            let pose = pose_of(next.ends[held].grasp).expect("grasped");
            let out = outward_axis(pose, &next.ends[held], held);
            let (_, dir) = droop(next.stiffness, &out);
            next.ends[1 - held].point = next.ends[held].point + dir * next.length;
        }
        2 => {
            let distance = next.axis().norm();
            if distance > next.length + overstretch_tol {
                return Err(ObjectError::Overstretch {
                    distance,
                    length: next.length,
                });
            }
        }
        _ => {}
    }
    Ok(next)
}
