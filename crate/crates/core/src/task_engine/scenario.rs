use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config_opt::{ArmProblem, OptimizationProblem, OptimizerSettings, VariationWeights};
use crate::kinematics::{IkOptions, JointConfig, KinematicChain, KinematicsError, Pose};
use crate::manipulability::FitnessWeights;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("arm chain {path}: {source}")]
    Chain {
        path: PathBuf,
        source: KinematicsError,
    },
}

/// Twist targets, gripper rotations in degrees about the shared axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistPlan {
    pub theta_r_deg: f64,
    pub theta_l_deg: f64,
    pub theta_t_deg: f64,
    /// Per-tick rotation limit of the planned motions.
    pub rate_deg: f64,
    #[serde(default)]
    pub left: LeftTwistSource,
    /// Extra rotation the mirrored left plan adds past its target so that
    /// measurement noise cannot leave θ_t a hair under θ_T.
    #[serde(default = "default_margin")]
    pub completion_margin_deg: f64,
}

fn default_margin() -> f64 {
    0.5
}

impl Default for TwistPlan {
    fn default() -> Self {
        Self {
            theta_r_deg: -45.0,
            theta_l_deg: 45.0,
            theta_t_deg: 90.0,
            rate_deg: 1.0,
            left: LeftTwistSource::Teleop,
            completion_margin_deg: default_margin(),
        }
    }
}

impl TwistPlan {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let finite = [self.theta_r_deg, self.theta_l_deg, self.theta_t_deg, self.rate_deg];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(ScenarioError::Invalid("twist plan values must be finite".into()));
        }
        if !(self.theta_t_deg > 0.0) || !(self.rate_deg > 0.0) || self.completion_margin_deg < 0.0 {
            return Err(ScenarioError::Invalid(
                "theta_t and rate must be positive, margin non-negative".into(),
            ));
        }
        if (self.theta_l_deg - self.theta_r_deg).abs() < self.theta_t_deg {
            return Err(ScenarioError::Invalid(format!(
                "|theta_l - theta_r| = {} cannot reach theta_t = {}",
                (self.theta_l_deg - self.theta_r_deg).abs(),
                self.theta_t_deg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftTwistSource {
    /// The operator turns the left gripper.
    #[default]
    Teleop,
    /// The left gripper follows a plan mirroring the right one.
    Mirrored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmsSection {
    pub left: PathBuf,
    pub right: PathBuf,
    pub left_home: JointConfig,
    pub right_home: JointConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSection {
    pub length: f64,
    pub stiffness: f64,
    pub p1: [f64; 3],
    pub axis: [f64; 3],
    /// Misgrasp of the right gripper, injected when it closes on P₁.
    #[serde(default)]
    pub grasp_tilt_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskSection {
    /// P_S: where the right arm holds P₁ for the twist.
    pub hold_position: [f64; 3],
    pub hold_axis: [f64; 3],
    pub grasp_x_hint: [f64; 3],
    pub hold_x_hint: [f64; 3],
    /// Distance the right gripper backs off along the object axis before
    /// the final straight approach to P₁.
    pub approach_offset: f64,
    pub delta_tor_deg: f64,
    /// Defaults to the object length.
    pub d_thr: Option<f64>,
    pub grasp_position_tol: f64,
    pub grasp_angle_tol_deg: f64,
    pub linear_step: f64,
    pub angular_step_deg: f64,
    pub overstretch_tol: f64,
    /// Issue the lift automatically after this many ticks in GraspRight.
    pub auto_lift_ticks: Option<u64>,
    pub align_timeout_ticks: Option<u64>,
}

impl Default for TaskSection {
    fn default() -> Self {
        Self {
            hold_position: [0.35, 0.0, 0.3],
            hold_axis: [0.0, 1.0, 0.0],
            grasp_x_hint: [0.0, 0.0, -1.0],
            hold_x_hint: [0.0, 0.0, -1.0],
            approach_offset: 0.05,
            delta_tor_deg: 5.0,
            d_thr: None,
            grasp_position_tol: 0.005,
            grasp_angle_tol_deg: 10.0,
            linear_step: 0.005,
            angular_step_deg: 2.0,
            overstretch_tol: 0.01,
            auto_lift_ticks: Some(10),
            align_timeout_ticks: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeleopSection {
    pub scale: f64,
    /// Master-to-slave frame rotation, roll/pitch/yaw radians.
    pub rpy: [f64; 3],
    pub max_joint_step: f64,
    pub singularity_floor: f64,
    /// Recorded command trace; absent means live input.
    pub trace: Option<PathBuf>,
}

impl Default for TeleopSection {
    fn default() -> Self {
        Self {
            scale: 1.0,
            rpy: [0.0; 3],
            max_joint_step: 0.05,
            singularity_floor: 1e-3,
            trace: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub lambda_m: f64,
    pub singularity_floor: f64,
    pub seeds: usize,
    pub beta: FitnessWeights,
    pub alpha: VariationWeights,
    /// x axis hint for the left gripper's twist pose at P₂.
    pub left_x_hint: [f64; 3],
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            lambda_m: 1.0,
            singularity_floor: 1e-3,
            seeds: 8,
            beta: FitnessWeights::default(),
            alpha: VariationWeights::default(),
            left_x_hint: [0.0, 0.0, -1.0],
        }
    }
}

fn engine_ik() -> IkOptions {
    IkOptions::default().with_tol(1e-6)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub arms: ArmsSection,
    pub object: ObjectSection,
    #[serde(default)]
    pub task: TaskSection,
    #[serde(default)]
    pub twist: TwistPlan,
    #[serde(default)]
    pub teleop: TeleopSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default = "engine_ik")]
    pub ik: IkOptions,
}

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

impl Scenario {
    /// Parses a scenario; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        let mut s: Scenario = toml::from_str(text)?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut s.arms.left);
        resolve(&mut s.arms.right);
        if let Some(t) = s.teleop.trace.as_mut() {
            resolve(t);
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, dir)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.twist.validate()?;
        let t = &self.task;
        let o = &self.object;
        let invalid = |msg: String| Err(ScenarioError::Invalid(msg));
        if !(o.length > 0.0) || !(0.0..=1.0).contains(&o.stiffness) {
            return invalid(format!("object length {} / stiffness {} out of range", o.length, o.stiffness));
        }
        for (name, v) in [("object.axis", o.axis), ("task.hold_axis", t.hold_axis)] {
            if vec3(v).norm() < 1e-9 {
                return invalid(format!("{name} must be non-zero"));
            }
        }
        if !(t.delta_tor_deg > 0.0) || !(t.linear_step > 0.0) || !(t.angular_step_deg > 0.0) {
            return invalid("delta_tor, linear_step and angular_step must be positive".into());
        }
        if !(t.grasp_position_tol > 0.0) || !(t.grasp_angle_tol_deg > 0.0) || t.overstretch_tol < 0.0 {
            return invalid("grasp tolerances must be positive".into());
        }
        if self.d_thr() < 0.0 {
            return invalid(format!("d_thr must be non-negative, got {}", self.d_thr()));
        }
        if t.approach_offset < 0.0 {
            return invalid("approach_offset must be non-negative".into());
        }
        if !(self.teleop.scale > 0.0) || !(self.teleop.max_joint_step > 0.0) || !(self.teleop.singularity_floor > 0.0) {
            return invalid("teleop scale, step bound and singularity floor must be positive".into());
        }
        if !(self.ik.tol > 0.0) || self.ik.max_iters == 0 {
            return invalid("ik tolerance and iteration budget must be positive".into());
        }
        Ok(())
    }

    pub fn d_thr(&self) -> f64 {
        self.task.d_thr.unwrap_or(self.object.length)
    }

    pub fn object_axis(&self) -> Vector3<f64> {
        vec3(self.object.axis).normalize()
    }

    pub fn p1(&self) -> Vector3<f64> {
        vec3(self.object.p1)
    }

    pub fn hold_position(&self) -> Vector3<f64> {
        vec3(self.task.hold_position)
    }

    /// Right gripper pose closed on P₁, z along the object axis.
    pub fn grasp_pose(&self) -> Pose {
        Pose::from_axis(self.p1(), &self.object_axis(), &vec3(self.task.grasp_x_hint))
    }

    /// Right gripper pose holding P₁ at P_S.
    pub fn hold_pose(&self) -> Pose {
        Pose::from_axis(self.hold_position(), &vec3(self.task.hold_axis), &vec3(self.task.hold_x_hint))
    }

    /// Left gripper pose on a straight, reconstructed object held at P_S.
    pub fn left_twist_pose(&self) -> Pose {
        let axis = vec3(self.task.hold_axis).normalize();
        Pose::from_axis(
            self.hold_position() + axis * self.object.length,
            &axis,
            &vec3(self.optimizer.left_x_hint),
        )
    }
}

/// A scenario with its arm chains loaded.
#[derive(Debug, Clone)]
pub struct TaskSetup {
    pub scenario: Scenario,
    pub left: KinematicChain,
    pub right: KinematicChain,
}

impl TaskSetup {
    pub fn new(scenario: Scenario, left: KinematicChain, right: KinematicChain) -> Result<Self, ScenarioError> {
        for (name, chain, home) in [
            ("left", &left, &scenario.arms.left_home),
            ("right", &right, &scenario.arms.right_home),
        ] {
            chain.check_config(home).map_err(|e| ScenarioError::Invalid(format!("{name}_home: {e}")))?;
            if !chain.within_limits(home) {
                return Err(ScenarioError::Invalid(format!("{name}_home violates joint limits")));
            }
        }
        Ok(Self { scenario, left, right })
    }

    /// Loads the chains named by the scenario, unless overridden.
    pub fn load(scenario: Scenario, left_arm: Option<&Path>, right_arm: Option<&Path>) -> Result<Self, ScenarioError> {
        let load = |p: &Path| {
            KinematicChain::load(p).map_err(|source| ScenarioError::Chain {
                path: p.to_path_buf(),
                source,
            })
        };
        let left = load(left_arm.unwrap_or(&scenario.arms.left))?;
        let right = load(right_arm.unwrap_or(&scenario.arms.right))?;
        Self::new(scenario, left, right)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::load(Scenario::load(path)?, None, None)
    }

    /// Twist configurations to choose: both arms start from home, the right
    /// holds P₁ at the hold pose and the left meets it at the far end.
    pub fn optimization_problem(&self) -> OptimizationProblem<'_> {
        let s = &self.scenario;
        OptimizationProblem {
            left: ArmProblem {
                chain: &self.left,
                initial: s.arms.left_home.clone(),
                target: s.left_twist_pose(),
                alpha: s.optimizer.alpha.clone(),
            },
            right: ArmProblem {
                chain: &self.right,
                initial: s.arms.right_home.clone(),
                target: s.hold_pose(),
                alpha: s.optimizer.alpha.clone(),
            },
            settings: OptimizerSettings {
                beta: s.optimizer.beta,
                lambda_m: s.optimizer.lambda_m,
                singularity_floor: s.optimizer.singularity_floor,
                d_thr: s.d_thr(),
                seeds_per_arm: s.optimizer.seeds,
                ik: s.ik,
                ..OptimizerSettings::default()
            },
        }
    }
}
