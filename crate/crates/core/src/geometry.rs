//! Shared 3-D math.
//!
//! Conventions used throughout the crate:
//!
//! * Quaternions are Hamilton, scalar-first. `q_wi` is the passive body-to-world
//!   rotation, so `C(q_wi) * v_body = v_world`.
//! * The world frame is East-North-Up with gravity `[0, 0, -9.80665]` m/s².
//! * The body frame is Forward-Left-Up.
//!
//! Storage is backed by `nalgebra`; this module adds the handful of operators
//! the rest of the stack needs on top of it.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type UnitQuat = UnitQuaternion<f64>;
pub type RotMat3 = Matrix3<f64>;

/// Standard gravity magnitude, m/s².
pub const GRAVITY: f64 = 9.80665;

/// Gravity vector in the ENU world frame.
pub fn gravity() -> Vec3 {
    Vec3::new(0.0, 0.0, -GRAVITY)
}

/// Maximum deviation from unit norm accepted for quaternion inputs.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("quaternion norm {0} is not unit within tolerance")]
    NonUnitQuaternion(f64),
}

/// Cross-product matrix: `skew(v) * u == v.cross(&u)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] for an antisymmetric matrix.
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rotation matrix of a raw scalar-first quaternion. Rejects non-unit input.
pub fn quat_to_rotmat(q: &Quaternion<f64>) -> Result<RotMat3, GeometryError> {
    let n = q.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(GeometryError::NonUnitQuaternion(n));
    }
    Ok(rotmat(&UnitQuat::new_unchecked(*q)))
}

/// Rotation matrix of a unit quaternion (body to parent frame).
#[inline]
pub fn rotmat(q: &UnitQuat) -> RotMat3 {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Renormalizes a quaternion, keeping the scalar part non-negative.
pub fn normalize(q: Quaternion<f64>) -> UnitQuat {
    let q = if q.w < 0.0 { -q } else { q };
    UnitQuat::new_normalize(q)
}

/// Error-state attitude correction `q ⊗ [1, δθ/2]`, renormalized.
pub fn apply_small_angle(q: &UnitQuat, dtheta: &Vec3) -> UnitQuat {
    let dq = Quaternion::new(1.0, 0.5 * dtheta.x, 0.5 * dtheta.y, 0.5 * dtheta.z);
    UnitQuat::new_normalize(q.into_inner() * dq)
}

/// Exact rotation-vector exponential `q ⊗ exp(φ)`.
pub fn compose_rotation_vector(q: &UnitQuat, phi: &Vec3) -> UnitQuat {
    UnitQuat::new_normalize(q.into_inner() * exp_quat(phi).into_inner())
}

/// Quaternion of a rotation vector.
pub fn exp_quat(phi: &Vec3) -> UnitQuat {
    let angle = phi.norm();
    if angle < 1e-12 {
        return UnitQuat::new_normalize(Quaternion::new(1.0, 0.5 * phi.x, 0.5 * phi.y, 0.5 * phi.z));
    }
    let axis = phi / angle;
    let (s, c) = (0.5 * angle).sin_cos();
    UnitQuat::new_unchecked(Quaternion::new(c, s * axis.x, s * axis.y, s * axis.z))
}

/// Rotation vector of a unit quaternion, shortest rotation.
pub fn log_quat(q: &UnitQuat) -> Vec3 {
    let q = if q.w < 0.0 { -q.into_inner() } else { q.into_inner() };
    let v = Vec3::new(q.i, q.j, q.k);
    let s = v.norm();
    if s < 1e-12 {
        return 2.0 * v;
    }
    let angle = 2.0 * s.atan2(q.w);
    v * (angle / s)
}

/// Quaternion for a pure yaw rotation about world z.
pub fn yaw_quat(yaw: f64) -> UnitQuat {
    let (s, c) = (0.5 * yaw).sin_cos();
    UnitQuat::new_unchecked(Quaternion::new(c, 0.0, 0.0, s))
}

/// Z-Y-X yaw of a body-to-world attitude.
pub fn yaw_of(q: &UnitQuat) -> f64 {
    let r = rotmat(q);
    r[(1, 0)].atan2(r[(0, 0)])
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

/// Quaternion from roll, pitch, yaw (Z-Y-X intrinsic).
pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> UnitQuat {
    UnitQuat::from_euler_angles(roll, pitch, yaw)
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}
