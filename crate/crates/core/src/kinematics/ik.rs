use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::{JointConfig, KinematicChain, KinematicsError, Pose};

/// Damped-least-squares solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkOptions {
    /// Convergence threshold on position error + 0.5 × orientation angle.
    pub tol: f64,
    pub max_iters: usize,
    /// Damping factor λ; the solver regularizes with λ².
    pub damping: f64,
    /// Per-iteration cap on the translational error fed to the solver (m).
    pub max_linear_step: f64,
    /// Per-iteration cap on the rotational error fed to the solver (rad).
    pub max_angular_step: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iters: 200,
            damping: 0.01,
            max_linear_step: 0.1,
            max_angular_step: 0.5,
        }
    }
}

impl IkOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub config: JointConfig,
    pub residual: f64,
    pub iterations: usize,
}

/// Iterations without any residual improvement before the solver gives up.
const STALL_LIMIT: usize = 25;

impl KinematicChain {
    /// Solves for a joint configuration reaching `target`, starting from
    /// `seed`. Every iterate is clamped to the joint limits, so both the
    /// solution and the best iterate carried by the error respect them.
    pub fn inverse_kinematics(
        &self,
        target: &Pose,
        seed: &JointConfig,
        opts: &IkOptions,
    ) -> Result<IkSolution, KinematicsError> {
        self.check_config(seed)?;
        if !(opts.tol > 0.0) {
            return Err(KinematicsError::Configuration(format!(
                "IK tolerance must be positive, got {}",
                opts.tol
            )));
        }
        let mut q = seed.clone();
        self.clamp(&mut q);
        let mut current = self.forward_kinematics(&q)?;
        let mut residual = current.weighted_error(target);
        if residual <= opts.tol {
            return Ok(IkSolution {
                config: q,
                residual,
                iterations: 0,
            });
        }

        let base = self.base().translation.vector;
        if (target.position - base).norm() > self.reach() {
            return Err(KinematicsError::Unreachable { residual, best: q });
        }

        let n = self.joint_count();
        let lambda_sq = opts.damping * opts.damping;
        let mut best = (residual, q.clone());
        let mut stalled = 0;

        for iter in 1..=opts.max_iters {
            let (dp, dr) = target.difference(&current);
            let err = DVector::from_iterator(
                6,
                cap(dp, opts.max_linear_step)
                    .iter()
                    .chain(cap(dr, opts.max_angular_step).iter())
                    .copied(),
            );
            let j = self.jacobian(&q)?.full();
            let jjt = &j * j.transpose() + DMatrix::identity(6, 6) * lambda_sq;
            let Some(chol) = jjt.cholesky() else {
                break;
            };
            let dq = j.transpose() * chol.solve(&err);
            for i in 0..n {
                q[i] += dq[i];
            }
            self.clamp(&mut q);

            current = self.forward_kinematics(&q)?;
            residual = current.weighted_error(target);
            if residual <= opts.tol {
                return Ok(IkSolution {
                    config: q,
                    residual,
                    iterations: iter,
                });
            }
            if residual < best.0 {
                best = (residual, q.clone());
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= STALL_LIMIT {
                    break;
                }
            }
        }
        Err(KinematicsError::Unreachable {
            residual: best.0,
            best: best.1,
        })
    }
}

fn cap(v: Vector3<f64>, limit: f64) -> Vector3<f64> {
    let n = v.norm();
    if n > limit {
        v * (limit / n)
    } else {
        v
    }
}
