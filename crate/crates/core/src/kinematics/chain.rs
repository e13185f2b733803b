use std::path::Path;

use nalgebra::{DMatrix, Isometry3, Matrix3xX, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::pose::{rpy_quaternion, Pose};
use super::KinematicsError;

const AXIS_NORM_TOL: f64 = 1e-9;

/// Revolute joint: rotation about `axis` (expressed in the frame reached
/// after the previous link), followed by the fixed `link` transform that
/// carries the frame to the next joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub axis: Unit<Vector3<f64>>,
    pub link: Isometry3<f64>,
    pub min: f64,
    pub max: f64,
}

impl Joint {
    pub fn new(axis: Vector3<f64>, link: Isometry3<f64>, min: f64, max: f64) -> Result<Self, KinematicsError> {
        if (axis.norm() - 1.0).abs() > AXIS_NORM_TOL {
            return Err(KinematicsError::Configuration(format!(
                "joint axis {:?} is not unit length (norm {})",
                axis.as_slice(),
                axis.norm()
            )));
        }
        if !(min < max) {
            return Err(KinematicsError::Configuration(format!(
                "joint limits must satisfy min < max, got [{min}, {max}]"
            )));
        }
        Ok(Self {
            axis: Unit::new_unchecked(axis),
            link,
            min,
            max,
        })
    }

    fn motion(&self, angle: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&self.axis, angle)
    }
}

/// Serial chain of revolute joints mounted at `base` in the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    name: String,
    base: Isometry3<f64>,
    joints: Vec<Joint>,
}

/// Joint-angle vector for one arm, radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(Vec<f64>);

impl JointConfig {
    pub fn new(angles: Vec<f64>) -> Self {
        Self(angles)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Largest absolute per-joint difference.
    pub fn max_abs_diff(&self, other: &JointConfig) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl std::ops::Index<usize> for JointConfig {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for JointConfig {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Geometric Jacobian at the end-effector, world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub linear: Matrix3xX<f64>,
    pub angular: Matrix3xX<f64>,
}

impl Jacobian {
    pub fn ncols(&self) -> usize {
        self.linear.ncols()
    }

    /// Stacked 6×n matrix, linear block on top.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.ncols();
        let mut m = DMatrix::zeros(6, n);
        m.view_mut((0, 0), (3, n)).copy_from(&self.linear);
        m.view_mut((3, 0), (3, n)).copy_from(&self.angular);
        m
    }
}

impl KinematicChain {
    pub fn new(name: impl Into<String>, base: Isometry3<f64>, joints: Vec<Joint>) -> Result<Self, KinematicsError> {
        if joints.is_empty() {
            return Err(KinematicsError::Configuration("chain has no joints".into()));
        }
        Ok(Self {
            name: name.into(),
            base,
            joints,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> &Isometry3<f64> {
        &self.base
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    /// Upper bound on the distance from the base origin to the end-effector.
    pub fn reach(&self) -> f64 {
        self.joints.iter().map(|j| j.link.translation.vector.norm()).sum()
    }

    pub fn check_config(&self, q: &JointConfig) -> Result<(), KinematicsError> {
        if q.len() != self.joint_count() {
            return Err(KinematicsError::LengthMismatch {
                expected: self.joint_count(),
                actual: q.len(),
            });
        }
        Ok(())
    }

    pub fn clamp(&self, q: &mut JointConfig) {
        for (v, j) in q.as_mut_slice().iter_mut().zip(&self.joints) {
            *v = v.clamp(j.min, j.max);
        }
    }

    pub fn within_limits(&self, q: &JointConfig) -> bool {
        q.len() == self.joint_count()
            && q.as_slice()
                .iter()
                .zip(&self.joints)
                .all(|(v, j)| *v >= j.min && *v <= j.max)
    }

    /// World frames reached after each joint+link, base first: n+1 frames.
    fn frames(&self, q: &JointConfig) -> Result<Vec<Isometry3<f64>>, KinematicsError> {
        self.check_config(q)?;
        let mut frames = Vec::with_capacity(self.joint_count() + 1);
        let mut t = self.base;
        frames.push(t);
        for (joint, &angle) in self.joints.iter().zip(q.as_slice()) {
            t = t * Isometry3::from_parts(Translation3::identity(), joint.motion(angle)) * joint.link;
            frames.push(t);
        }
        Ok(frames)
    }

    pub fn forward_kinematics(&self, q: &JointConfig) -> Result<Pose, KinematicsError> {
        let frames = self.frames(q)?;
        Ok(Pose::from_isometry(frames.last().expect("chain has joints")))
    }

    /// Base origin, each joint location and the end-effector: `joint_count + 1`
    /// points. Point `i` depends only on joints `0..i`.
    pub fn joint_positions(&self, q: &JointConfig) -> Result<Vec<Vector3<f64>>, KinematicsError> {
        Ok(self.frames(q)?.iter().map(|f| f.translation.vector).collect())
    }

    pub fn jacobian(&self, q: &JointConfig) -> Result<Jacobian, KinematicsError> {
        let frames = self.frames(q)?;
        let n = self.joint_count();
        let end = frames[n].translation.vector;
        let mut linear = Matrix3xX::zeros(n);
        let mut angular = Matrix3xX::zeros(n);
        for (i, joint) in self.joints.iter().enumerate() {
            // joint i rotates about its axis at the origin of frame i
            let axis = frames[i].rotation * joint.axis.into_inner();
            let lever = end - frames[i].translation.vector;
            linear.set_column(i, &axis.cross(&lever));
            angular.set_column(i, &axis);
        }
        Ok(Jacobian { linear, angular })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, KinematicsError> {
        let file: ChainFile =
            toml::from_str(text).map_err(|e| KinematicsError::Configuration(format!("chain file: {e}")))?;
        file.into_chain()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KinematicsError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| KinematicsError::Configuration(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Representative YuMi-like right arm shipped with the crate.
    pub fn default_right() -> Self {
        Self::from_toml_str(DEFAULT_RIGHT).expect("bundled right arm is valid")
    }

    /// Representative YuMi-like left arm shipped with the crate.
    pub fn default_left() -> Self {
        Self::from_toml_str(DEFAULT_LEFT).expect("bundled left arm is valid")
    }
}

const DEFAULT_RIGHT: &str = include_str!("../../../../scenarios/yumi_right.toml");
const DEFAULT_LEFT: &str = include_str!("../../../../scenarios/yumi_left.toml");

/// On-disk chain description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub name: String,
    #[serde(default)]
    pub joint_count: Option<usize>,
    #[serde(default)]
    pub base: FrameSpec,
    pub joints: Vec<JointSpec>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    #[serde(default)]
    pub translation: [f64; 3],
    /// Roll, pitch, yaw in radians.
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl FrameSpec {
    pub fn to_isometry(&self) -> Isometry3<f64> {
        let [x, y, z] = self.translation;
        Isometry3::from_parts(Translation3::new(x, y, z), rpy_quaternion(self.rpy))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointSpec {
    pub axis: [f64; 3],
    pub limits: [f64; 2],
    #[serde(flatten)]
    pub link: FrameSpec,
}

impl ChainFile {
    pub fn into_chain(self) -> Result<KinematicChain, KinematicsError> {
        if let Some(n) = self.joint_count {
            if n != self.joints.len() {
                return Err(KinematicsError::Configuration(format!(
                    "joint_count = {n} but {} joints listed",
                    self.joints.len()
                )));
            }
        }
        let joints = self
            .joints
            .iter()
            .map(|j| {
                Joint::new(
                    Vector3::from(j.axis),
                    j.link.to_isometry(),
                    j.limits[0],
                    j.limits[1],
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        KinematicChain::new(self.name, self.base.to_isometry(), joints)
    }
}
