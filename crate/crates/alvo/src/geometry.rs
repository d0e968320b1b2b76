//! Rigid-body poses and the handful of SE(3) operations the rest of the
//! crate needs: composition, inversion, relative pose and rotation angle.
//!
//! Rotations are stored as unit quaternions and renormalized after every
//! composition so long chains do not drift away from the manifold.

use nalgebra::{Matrix3, Matrix4, UnitQuaternion, Vector3};

/// A rigid transform: rotation followed by translation, both in meters/radians.
///
/// `Pose` is used both as "frame B expressed in frame A" (extrinsics, ground
/// truth, estimates) and as a motion increment; composition is the usual
/// `a ∘ b` with `a` applied last.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            rotation: UnitQuaternion::new_normalize(rotation.into_inner()),
            translation,
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    /// Rotation about `axis` by `angle` radians, then translation.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let axis = nalgebra::Unit::new_normalize(*axis);
        Pose {
            rotation: UnitQuaternion::from_axis_angle(&axis, angle),
            translation,
        }
    }

    /// Roll-pitch-yaw (x, y, z) Euler construction, radians.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64, translation: Vector3<f64>) -> Self {
        Pose {
            rotation: UnitQuaternion::from_euler_angles(roll, pitch, yaw),
            translation,
        }
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// 4x4 homogeneous matrix form.
    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Rigid composition `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let rotation = self.rotation * other.rotation;
        Pose {
            // Renormalize so long chains stay on the unit quaternion manifold.
            rotation: UnitQuaternion::new_normalize(rotation.into_inner()),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rot_inv = self.rotation.inverse();
        Pose {
            rotation: rot_inv,
            translation: -(rot_inv * self.translation),
        }
    }

    /// Map a point given in this pose's local frame into the parent frame.
    pub fn transform_point(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    /// Rotate a direction vector (no translation).
    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Geodesic rotation angle |θ| ∈ [0, π].
    ///
    /// Uses the two-argument arctangent form of the quaternion log map,
    /// which stays accurate near 0 and π where `acos` loses digits.
    pub fn rotation_angle(&self) -> f64 {
        let q = self.rotation.quaternion();
        let vec_norm = q.vector().norm();
        2.0 * vec_norm.atan2(q.scalar().abs())
    }

    /// Largest deviation from the identity, as (rotation angle, translation norm).
    pub fn error_magnitude(&self) -> (f64, f64) {
        (self.rotation_angle(), self.translation.norm())
    }
}

/// The pose `E` with `compose(b, E) = a`: the relative pose from `b` to `a`.
pub fn relative_pose(a: &Pose, b: &Pose) -> Pose {
    b.inverse().compose(a)
}

/// Closed-form rotation-matrix to quaternion conversion via the
/// largest-pivot branch. Non-iterative, so it cannot stall on inputs the
/// way an optimization-based conversion can; the input must already be a
/// proper rotation.
pub fn quaternion_from_rotation(m: &Matrix3<f64>) -> UnitQuaternion<f64> {
    let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
    let (w, x, y, z);
    if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (m[(2, 1)] - m[(1, 2)]) / s;
        y = (m[(0, 2)] - m[(2, 0)]) / s;
        z = (m[(1, 0)] - m[(0, 1)]) / s;
    } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
        let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(2, 1)] - m[(1, 2)]) / s;
        x = 0.25 * s;
        y = (m[(0, 1)] + m[(1, 0)]) / s;
        z = (m[(0, 2)] + m[(2, 0)]) / s;
    } else if m[(1, 1)] > m[(2, 2)] {
        let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
        w = (m[(0, 2)] - m[(2, 0)]) / s;
        x = (m[(0, 1)] + m[(1, 0)]) / s;
        y = 0.25 * s;
        z = (m[(1, 2)] + m[(2, 1)]) / s;
    } else {
        let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
        w = (m[(1, 0)] - m[(0, 1)]) / s;
        x = (m[(0, 2)] + m[(2, 0)]) / s;
        y = (m[(1, 2)] + m[(2, 1)]) / s;
        z = 0.25 * s;
    }
    UnitQuaternion::new_normalize(nalgebra::Quaternion::new(w, x, y, z))
}

/// Spherical-linear interpolation between two poses: linear in translation,
/// slerp (shortest arc) in rotation. `t` in [0, 1].
pub fn interpolate(a: &Pose, b: &Pose, t: f64) -> Pose {
    let qa = a.rotation;
    let mut qb = b.rotation;
    // Slerp along the shorter arc.
    if qa.quaternion().dot(qb.quaternion()) < 0.0 {
        qb = UnitQuaternion::new_unchecked(-qb.into_inner());
    }
    let rotation = qa.try_slerp(&qb, t, 1e-12).unwrap_or(qa);
    Pose {
        rotation,
        translation: a.translation.lerp(&b.translation, t),
    }
}
