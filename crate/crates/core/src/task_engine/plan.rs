use nalgebra::{UnitQuaternion, Vector3};

use crate::kinematics::Pose;

/// Straight-line end-effector path: positions interpolated linearly,
/// orientations by slerp, with enough steps that no step exceeds the
/// linear or angular bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPath {
    pub start: Pose,
    pub end: Pose,
    pub steps: usize,
}

impl LinearPath {
    pub fn new(start: Pose, end: Pose, linear_step: f64, angular_step: f64) -> Self {
        let by_distance = ((end.position - start.position).norm() / linear_step).ceil();
        let by_angle = (start.angle_to(&end) / angular_step).ceil();
        Self {
            start,
            end,
            steps: by_distance.max(by_angle) as usize,
        }
    }

    /// Pose after `k` steps; `k ≥ steps` gives the end pose exactly.
    pub fn waypoint(&self, k: usize) -> Pose {
        if k >= self.steps {
            return self.end;
        }
        let t = k as f64 / self.steps as f64;
        let position = self.start.position.lerp(&self.end.position, t);
        let orientation = self
            .start
            .orientation
            .try_slerp(&self.end.orientation, t, 1e-12)
            .unwrap_or(self.start.orientation);
        Pose::new(position, orientation)
    }

    /// Waypoints 1..=steps (the start pose is where the arm already is).
    pub fn waypoints(&self) -> Vec<Pose> {
        (1..=self.steps).map(|k| self.waypoint(k)).collect()
    }
}

/// Accumulated twist `|θ_L − θ_R|` in degrees.
pub fn twist_progress(right_angle: f64, left_angle: f64) -> f64 {
    (left_angle - right_angle).abs()
}

/// Rotation (degrees) about `axis` that takes `prev` onto `cur`, measured
/// as the world-frame rotation vector projected on the axis.
pub fn rotation_about(prev: &UnitQuaternion<f64>, cur: &UnitQuaternion<f64>, axis: &Vector3<f64>) -> f64 {
    (cur * prev.inverse()).scaled_axis().dot(axis).to_degrees()
}

/// Moves `current` toward `target` by at most `rate`.
pub fn step_toward(current: f64, target: f64, rate: f64) -> f64 {
    if (target - current).abs() <= rate {
        target
    } else {
        current + rate * (target - current).signum()
    }
}
