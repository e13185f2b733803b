//! Directional (rotational) manipulability along the twist axis and the
//! dual-arm fitness built from it.
//!
//! `M = 1 / (kᵀ (J_ω J_ωᵀ)⁻¹ k)` is the squared radius of the angular
//! velocity ellipsoid along `k`; because the force ellipsoid shares its
//! principal axes with reciprocal lengths, maximizing `M` along the twist
//! axis is what lets the arms hold a large counter-torque about it.

use nalgebra::{DMatrix, Matrix3, Matrix3xX, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{Jacobian, Pose};

/// Eigenvalues of `J_ω J_ωᵀ` at or below this are treated as zero.
pub const SINGULAR_EIGENVALUE: f64 = 1e-12;
const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ManipulabilityError {
    #[error("direction must be a unit vector (norm {0})")]
    NonUnitDirection(f64),
    #[error("singular configuration: manipulability {0} is not positive")]
    Singular(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionFrame {
    EndEffector,
    Base,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalManipulability {
    pub value: f64,
    pub direction: Vector3<f64>,
    pub frame: DirectionFrame,
}

/// `1 / kᵀ (J_ω J_ωᵀ)⁻¹ k` for unit `k`.
///
/// When `J_ω J_ωᵀ` is singular the limiting value is returned: zero if `k`
/// reaches into the null space, otherwise the value on the range space
/// through the pseudo-inverse.
pub fn directional_manipulability(j_omega: &Matrix3xX<f64>, k: &Vector3<f64>) -> Result<f64, ManipulabilityError> {
    let norm = k.norm();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(ManipulabilityError::NonUnitDirection(norm));
    }
    let a: Matrix3<f64> = j_omega * j_omega.transpose();
    let eig = a.symmetric_eigen();
    let min_eig = eig.eigenvalues.min();
    if min_eig > SINGULAR_EIGENVALUE {
        if let Some(chol) = a.cholesky() {
            return Ok(1.0 / k.dot(&chol.solve(k)));
        }
    }
    let mut quad = 0.0;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        let along = k.dot(&eig.eigenvectors.column(i));
        if lambda <= SINGULAR_EIGENVALUE {
            if along.abs() > UNIT_TOL {
                return Ok(0.0);
            }
        } else {
            quad += along * along / lambda;
        }
    }
    Ok(1.0 / quad)
}

/// The end-effector's local z axis in the base frame.
pub fn twist_axis_direction(ee_pose: &Pose) -> Vector3<f64> {
    ee_pose.z_axis().normalize()
}

/// Directional manipulability of an arm about its own twist axis.
pub fn twist_manipulability(jacobian: &Jacobian, ee_pose: &Pose) -> DirectionalManipulability {
    let k = twist_axis_direction(ee_pose);
    DirectionalManipulability {
        value: directional_manipulability(&jacobian.angular, &k).expect("normalized axis"),
        direction: k,
        frame: DirectionFrame::Base,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessWeights {
    pub beta_left: f64,
    pub beta_right: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        Self {
            beta_left: 1.0,
            beta_right: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManipulabilityFitness {
    pub f_m: f64,
    pub weights: FitnessWeights,
}

/// `β_L / M_L + β_R / M_R`; singular arms are rejected rather than scored.
pub fn manipulability_fitness(m_left: f64, m_right: f64, weights: &FitnessWeights) -> Result<ManipulabilityFitness, ManipulabilityError> {
    for m in [m_left, m_right] {
        if !(m > 0.0) {
            return Err(ManipulabilityError::Singular(m));
        }
    }
    Ok(ManipulabilityFitness {
        f_m: weights.beta_left / m_left + weights.beta_right / m_right,
        weights: *weights,
    })
}

/// Yoshikawa measure `sqrt(det(J Jᵀ))` of a 6×n Jacobian; zero when singular.
pub fn singularity_measure(jacobian: &Jacobian) -> f64 {
    yoshikawa(&jacobian.full())
}

pub fn yoshikawa(j: &DMatrix<f64>) -> f64 {
    let det = (j * j.transpose()).determinant();
    det.max(0.0).sqrt()
}
