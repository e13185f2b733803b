use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// End-effector (or any rigid frame) pose in a given reference frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Vector3::zeros(), UnitQuaternion::identity())
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    /// Local z axis of the frame expressed in the reference frame.
    pub fn z_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::z()
    }

    pub fn x_axis(&self) -> Vector3<f64> {
        self.orientation * Vector3::x()
    }

    /// Builds a frame whose z axis points along `z` and whose x axis is the
    /// component of `x_hint` orthogonal to `z`. Falls back to an arbitrary
    /// perpendicular when the hint is (nearly) parallel to `z`.
    pub fn from_axis(position: Vector3<f64>, z: &Vector3<f64>, x_hint: &Vector3<f64>) -> Self {
        let z = z.normalize();
        let mut x = x_hint - z * z.dot(x_hint);
        if x.norm() < 1e-9 {
            let fallback = if z.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            x = fallback - z * z.dot(&fallback);
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rot = nalgebra::Rotation3::from_basis_unchecked(&[x, y, z]);
        Self::new(position, UnitQuaternion::from_rotation_matrix(&rot))
    }

    /// Rotates the frame about its own z axis.
    pub fn rotated_about_local_z(&self, angle: f64) -> Self {
        let spin = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle);
        Self::new(self.position, self.orientation * spin)
    }

    /// `self ⊖ reference`: translation difference and world-frame rotation
    /// vector (quaternion log map) taking `reference` onto `self`.
    pub fn difference(&self, reference: &Pose) -> (Vector3<f64>, Vector3<f64>) {
        let dp = self.position - reference.position;
        let dr = self.orientation * reference.orientation.inverse();
        (dp, dr.scaled_axis())
    }

    /// Scalar pose error used as the IK convergence metric:
    /// position error (m) + 0.5 × orientation angle (rad).
    pub fn weighted_error(&self, reference: &Pose) -> f64 {
        let (dp, dr) = self.difference(reference);
        dp.norm() + ORIENTATION_WEIGHT * dr.norm()
    }

    pub fn angle_to(&self, other: &Pose) -> f64 {
        self.orientation.angle_to(&other.orientation)
    }
}

pub const ORIENTATION_WEIGHT: f64 = 0.5;

/// Quaternion from roll/pitch/yaw (extrinsic XYZ), radians.
pub fn rpy_quaternion(rpy: [f64; 3]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2])
}
