//! Grasp/twist configuration selection.
//!
//! Minimizes `f_a + λ_m · f_m` over both arms, where `f_a` is the weighted
//! joint variation from the initial configurations and `f_m` the
//! directional-manipulability fitness, subject to joint limits, a floor on
//! the Yoshikawa measure of each arm and the inter-arm distance threshold.
//!
//! The search is derivative-free: IK from several seeds spread over the
//! redundant joint gives a pool of candidates per arm, every pair is scored
//! in a fixed order, and the best feasible pair is then refined by
//! coordinate descent along each arm's null-space direction, re-projecting
//! onto the target pose with IK after every step. A step is only accepted
//! if it lowers the combined objective, so the accepted values form a
//! non-increasing sequence.

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{min_arm_distance, ArmSkeleton};
use crate::kinematics::{IkOptions, JointConfig, KinematicChain, KinematicsError, Pose};
use crate::manipulability::{
    directional_manipulability, singularity_measure, twist_axis_direction, FitnessWeights,
};

/// Two candidates closer than this in every joint are the same solution.
const DEDUP_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OptimizationError {
    #[error("input error: {0}")]
    Input(String),
    #[error("{arm} arm: no seed reaches the target")]
    Unreachable { arm: Arm },
    #[error("no feasible configuration; best candidate violates {violations:?}")]
    Infeasible { violations: Vec<Violation> },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Left,
    Right,
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arm::Left => "left",
            Arm::Right => "right",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Violation {
    JointLimits { arm: Arm },
    Singularity { arm: Arm, measure: f64 },
    ZeroManipulability { arm: Arm },
    Collision { d_min: f64 },
}

/// Per-joint weights on absolute joint variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VariationWeights(pub Vec<f64>);

impl Default for VariationWeights {
    /// Heavier near the base so the joints close to the end-effector
    /// take most of the motion.
    fn default() -> Self {
        Self(vec![1.0, 0.5, 0.5, 0.1, 0.1, 0.1, 0.1])
    }
}

impl VariationWeights {
    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|a| a * factor).collect())
    }
}

/// `Σ α_i |θ_i^final − θ_i^initial|` for one arm.
pub fn variation_cost(initial: &JointConfig, final_: &JointConfig, alpha: &VariationWeights) -> Result<f64, OptimizationError> {
    if initial.len() != final_.len() || initial.len() != alpha.0.len() {
        return Err(OptimizationError::Input(format!(
            "length mismatch: initial {}, final {}, weights {}",
            initial.len(),
            final_.len(),
            alpha.0.len()
        )));
    }
    Ok(initial
        .as_slice()
        .iter()
        .zip(final_.as_slice())
        .zip(&alpha.0)
        .map(|((a, b), w)| w * (b - a).abs())
        .sum())
}

#[derive(Debug, Clone)]
pub struct ArmProblem<'a> {
    pub chain: &'a KinematicChain,
    pub initial: JointConfig,
    pub target: Pose,
    pub alpha: VariationWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub beta: FitnessWeights,
    /// Weight of the manipulability fitness in the combined objective.
    pub lambda_m: f64,
    /// Minimum Yoshikawa measure for each arm.
    pub singularity_floor: f64,
    pub d_thr: f64,
    pub seeds_per_arm: usize,
    /// Index of the joint the seeds are spread over.
    pub redundant_joint: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_sweeps: usize,
    pub ik: IkOptions,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            beta: FitnessWeights::default(),
            lambda_m: 1.0,
            singularity_floor: 1e-3,
            d_thr: 0.0,
            seeds_per_arm: 8,
            redundant_joint: 2,
            initial_step: 0.2,
            min_step: 1e-3,
            max_sweeps: 50,
            ik: IkOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationProblem<'a> {
    pub left: ArmProblem<'a>,
    pub right: ArmProblem<'a>,
    pub settings: OptimizerSettings,
}

/// Objective terms and constraint values of one configuration pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub f_a: f64,
    /// `None` when either arm has zero manipulability about its twist axis.
    pub f_m: Option<f64>,
    pub combined: f64,
    pub m_left: f64,
    pub m_right: f64,
    pub singularity_left: f64,
    pub singularity_right: f64,
    pub d_min: f64,
    pub violations: Vec<Violation>,
}

impl Evaluation {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub left: JointConfig,
    pub right: JointConfig,
    pub f_a: f64,
    pub f_m: f64,
    pub combined: f64,
    pub m_left: f64,
    pub m_right: f64,
    pub singularity_left: f64,
    pub singularity_right: f64,
    pub d_min: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Plain single-seed IK solution from the initial configurations.
    pub baseline: Option<Evaluation>,
    /// Combined objective of every accepted candidate, in acceptance order.
    pub accepted: Vec<f64>,
}

/// Per-arm quantities that do not depend on the other arm.
#[derive(Debug, Clone)]
struct ArmEval {
    config: JointConfig,
    f_a: f64,
    manipulability: f64,
    singularity: f64,
    skeleton: ArmSkeleton,
    within_limits: bool,
}

fn eval_arm(arm: &ArmProblem<'_>, config: JointConfig) -> Result<ArmEval, OptimizationError> {
    let pose = arm.chain.forward_kinematics(&config)?;
    let jac = arm.chain.jacobian(&config)?;
    let k = twist_axis_direction(&pose);
    let manipulability = directional_manipulability(&jac.angular, &k).expect("unit twist axis");
    Ok(ArmEval {
        f_a: variation_cost(&arm.initial, &config, &arm.alpha)?,
        manipulability,
        singularity: singularity_measure(&jac),
        skeleton: ArmSkeleton::new(arm.chain.joint_positions(&config)?),
        within_limits: arm.chain.within_limits(&config),
        config,
    })
}

fn combine(left: &ArmEval, right: &ArmEval, s: &OptimizerSettings) -> Evaluation {
    let mut violations = Vec::new();
    for (arm, e) in [(Arm::Left, left), (Arm::Right, right)] {
        if !e.within_limits {
            violations.push(Violation::JointLimits { arm });
        }
        if e.singularity < s.singularity_floor {
            violations.push(Violation::Singularity {
                arm,
                measure: e.singularity,
            });
        }
        if !(e.manipulability > 0.0) {
            violations.push(Violation::ZeroManipulability { arm });
        }
    }
    let d_min = min_arm_distance(&left.skeleton, &right.skeleton, true)
        .map(|r| r.d_min)
        .unwrap_or(f64::INFINITY);
    if d_min < s.d_thr {
        violations.push(Violation::Collision { d_min });
    }
    let f_a = left.f_a + right.f_a;
    let f_m = (left.manipulability > 0.0 && right.manipulability > 0.0)
        .then(|| s.beta.beta_left / left.manipulability + s.beta.beta_right / right.manipulability);
    let combined = f_a + s.lambda_m * f_m.unwrap_or(f64::INFINITY);
    Evaluation {
        f_a,
        f_m,
        combined,
        m_left: left.manipulability,
        m_right: right.manipulability,
        singularity_left: left.singularity,
        singularity_right: right.singularity,
        d_min,
        violations,
    }
}

/// Seeds spread evenly over the redundant joint's range, the rest of the
/// configuration copied from `around`.
pub fn spread_seeds(chain: &KinematicChain, around: &JointConfig, joint: usize, count: usize) -> Vec<JointConfig> {
    let Some(spec) = chain.joints().get(joint) else {
        return Vec::new();
    };
    (0..count)
        .map(|k| {
            let mut q = around.clone();
            q[joint] = spec.min + (k as f64 + 0.5) / count as f64 * (spec.max - spec.min);
            q
        })
        .collect()
}

/// Distinct IK solutions reaching `target` from the given seeds.
pub fn null_space_candidates(
    chain: &KinematicChain,
    target: &Pose,
    seeds: &[JointConfig],
    ik: &IkOptions,
) -> Vec<JointConfig> {
    let mut out: Vec<JointConfig> = Vec::new();
    for seed in seeds {
        if let Ok(sol) = chain.inverse_kinematics(target, seed, ik) {
            if out.iter().all(|c| c.max_abs_diff(&sol.config) >= DEDUP_TOL) {
                out.push(sol.config);
            }
        }
    }
    out
}

/// Unit direction spanning the (numerical) null space of the arm's 6×n
/// Jacobian, sign-normalized so its largest component is positive.
fn null_direction(chain: &KinematicChain, q: &JointConfig) -> Option<DVector<f64>> {
    let n = chain.joint_count();
    if n <= 6 {
        return None;
    }
    let j = chain.jacobian(q).ok()?.full();
    let eig = (j.transpose() * &j).symmetric_eigen();
    let v: DVector<f64> = eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned();
    let lead = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    Some(if lead < 0.0 { -v } else { v })
}

fn validate(problem: &OptimizationProblem<'_>) -> Result<(), OptimizationError> {
    let s = &problem.settings;
    if !(s.lambda_m >= 0.0) {
        return Err(OptimizationError::Input(format!("lambda_m must be >= 0, got {}", s.lambda_m)));
    }
    if !(s.singularity_floor > 0.0) {
        return Err(OptimizationError::Input(format!(
            "singularity floor must be > 0, got {}",
            s.singularity_floor
        )));
    }
    for arm in [&problem.left, &problem.right] {
        arm.chain.check_config(&arm.initial)?;
        if arm.alpha.0.len() != arm.chain.joint_count() {
            return Err(OptimizationError::Input(format!(
                "{} variation weights for a {}-joint chain",
                arm.alpha.0.len(),
                arm.chain.joint_count()
            )));
        }
    }
    Ok(())
}

pub fn optimize_twist_configs(problem: &OptimizationProblem<'_>) -> Result<OptimizationResult, OptimizationError> {
    validate(problem)?;
    let s = &problem.settings;

    let pools = [(Arm::Left, &problem.left), (Arm::Right, &problem.right)].map(|(side, arm)| {
        let mut seeds = vec![arm.initial.clone()];
        seeds.extend(spread_seeds(arm.chain, &arm.initial, s.redundant_joint, s.seeds_per_arm));
        let baseline_reached = arm.chain.inverse_kinematics(&arm.target, &arm.initial, &s.ik).is_ok();
        (side, null_space_candidates(arm.chain, &arm.target, &seeds, &s.ik), baseline_reached)
    });
    let mut evals: Vec<Vec<ArmEval>> = Vec::with_capacity(2);
    for ((side, pool, _), arm) in pools.iter().zip([&problem.left, &problem.right]) {
        if pool.is_empty() {
            return Err(OptimizationError::Unreachable { arm: *side });
        }
        evals.push(pool.iter().cloned().map(|c| eval_arm(arm, c)).collect::<Result<_, _>>()?);
    }
    let (left_evals, right_evals) = (&evals[0], &evals[1]);

    // candidate 0 of each pool is the plain IK solution when it converged
    let baseline = (pools[0].2 && pools[1].2).then(|| combine(&left_evals[0], &right_evals[0], s));

    let mut best: Option<(usize, usize, Evaluation)> = None;
    let mut least_bad: Option<Evaluation> = None;
    for (i, le) in left_evals.iter().enumerate() {
        for (j, re) in right_evals.iter().enumerate() {
            let e = combine(le, re, s);
            if e.feasible() {
                if best.as_ref().is_none_or(|(_, _, b)| e.combined < b.combined) {
                    best = Some((i, j, e));
                }
            } else if least_bad.as_ref().is_none_or(|b| {
                (e.violations.len(), e.combined) < (b.violations.len(), b.combined)
            }) {
                least_bad = Some(e);
            }
        }
    }
    let Some((bi, bj, mut current)) = best else {
        return Err(OptimizationError::Infeasible {
            violations: least_bad.map(|e| e.violations).unwrap_or_default(),
        });
    };
    let mut arms = [left_evals[bi].clone(), right_evals[bj].clone()];
    let mut accepted = vec![current.combined];
    let mut iterations = 0;

    let problems = [&problem.left, &problem.right];
    let mut steps = [s.initial_step; 2];
    for _ in 0..s.max_sweeps {
        if steps.iter().all(|h| *h < s.min_step) {
            break;
        }
        for side in 0..2 {
            if steps[side] < s.min_step {
                continue;
            }
            let arm = problems[side];
            let Some(dir) = null_direction(arm.chain, &arms[side].config) else {
                steps[side] = 0.0;
                continue;
            };
            let mut improved = false;
            for sign in [1.0, -1.0] {
                iterations += 1;
                let mut seed = arms[side].config.clone();
                for (k, d) in dir.iter().enumerate() {
                    seed[k] += sign * steps[side] * d;
                }
                let Ok(sol) = arm.chain.inverse_kinematics(&arm.target, &seed, &s.ik) else {
                    continue;
                };
                let cand = eval_arm(arm, sol.config)?;
                let e = if side == 0 {
                    combine(&cand, &arms[1], s)
                } else {
                    combine(&arms[0], &cand, s)
                };
                if e.feasible() && e.combined < current.combined {
                    arms[side] = cand;
                    accepted.push(e.combined);
                    current = e;
                    improved = true;
                    break;
                }
            }
            if !improved {
                steps[side] *= 0.5;
            }
        }
    }

    let converged = steps.iter().all(|h| *h < s.min_step);
    let [left, right] = arms;
    Ok(OptimizationResult {
        f_a: current.f_a,
        f_m: current.f_m.expect("feasible pairs have positive manipulability"),
        combined: current.combined,
        m_left: current.m_left,
        m_right: current.m_right,
        singularity_left: current.singularity_left,
        singularity_right: current.singularity_right,
        d_min: current.d_min,
        iterations,
        converged,
        baseline,
        accepted,
        left: left.config,
        right: right.config,
    })
}

/// Re-derives the objective terms of a configuration pair from scratch.
pub fn evaluate_pair(
    problem: &OptimizationProblem<'_>,
    left: &JointConfig,
    right: &JointConfig,
) -> Result<Evaluation, OptimizationError> {
    let l = eval_arm(&problem.left, left.clone())?;
    let r = eval_arm(&problem.right, right.clone())?;
    Ok(combine(&l, &r, &problem.settings))
}

/// Pose reached by an arm with the twist axis along `axis` at `position`.
pub fn twist_pose(position: Vector3<f64>, axis: &Vector3<f64>, x_hint: &Vector3<f64>) -> Pose {
    Pose::from_axis(position, axis, x_hint)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variation_cost_uses_default_weights() {
        let a = VariationWeights::default();
        let zero = JointConfig::zeros(7);
        assert_eq!(variation_cost(&zero, &zero, &a).unwrap(), 0.0);
        let mut e1 = JointConfig::zeros(7);
        e1[0] = 1.0;
        assert_eq!(variation_cost(&zero, &e1, &a).unwrap(), 1.0);
        let mut e7 = JointConfig::zeros(7);
        e7[6] = 1.0;
        assert_eq!(variation_cost(&zero, &e7, &a).unwrap(), 0.1);
        // direction of the change does not matter
        assert_eq!(variation_cost(&e7, &zero, &a).unwrap(), 0.1);
    }

    #[test]
    fn variation_cost_length_mismatch() {
        let a = VariationWeights::default();
        assert!(matches!(
            variation_cost(&JointConfig::zeros(6), &JointConfig::zeros(6), &a),
            Err(OptimizationError::Input(_))
        ));
        assert!(variation_cost(&JointConfig::zeros(7), &JointConfig::zeros(6), &a).is_err());
    }

    #[test]
    fn default_weights_exact() {
        assert_eq!(VariationWeights::default().0, vec![1.0, 0.5, 0.5, 0.1, 0.1, 0.1, 0.1]);
    }

    #[test]
    fn seeds_span_the_joint_range() {
        let chain = KinematicChain::default_right();
        let seeds = spread_seeds(&chain, &JointConfig::zeros(7), 2, 8);
        assert_eq!(seeds.len(), 8);
        let j = &chain.joints()[2];
        for (k, s) in seeds.iter().enumerate() {
            assert!(s[2] > j.min && s[2] < j.max);
            if k > 0 {
                assert!(s[2] > seeds[k - 1][2]);
            }
            assert_eq!(s[0], 0.0);
        }
    }
}
