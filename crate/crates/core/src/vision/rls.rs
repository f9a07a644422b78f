//! Recursive least squares with exponential forgetting for the pad pose
//! `θ = [x, y, z, yaw]` in the world frame. The pad is assumed level.

use super::{CameraPoseEstimate, VisionError};
use crate::camera::{CameraModel, CameraPose};
use crate::geometry::{rotmat, wrap_angle, UnitQuat, Vec3};
use nalgebra::{Matrix4, Vector4};

pub const DEFAULT_FORGETTING: f64 = 0.95;
pub const DEFAULT_K_MIN: usize = 5;

/// Pad pose observation `[x, y, z, yaw]`, world frame.
pub type PadMeasurement = Vector4<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct RlsPadEstimate {
    pub theta: Vector4<f64>,
    pub covariance: Matrix4<f64>,
    pub lambda: f64,
    pub sample_count: usize,
}

impl RlsPadEstimate {
    pub fn with_prior(theta: Vector4<f64>, covariance: Matrix4<f64>, lambda: f64) -> Self {
        assert!(lambda > 0.0 && lambda <= 1.0, "forgetting factor must lie in (0, 1]");
        Self { theta, covariance, lambda, sample_count: 0 }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.theta[0], self.theta[1], self.theta[2])
    }

    pub fn yaw(&self) -> f64 {
        self.theta[3]
    }

    /// Largest horizontal position standard deviation, m.
    pub fn horizontal_sigma(&self) -> f64 {
        self.covariance[(0, 0)].max(self.covariance[(1, 1)]).sqrt()
    }
}

fn innovation(z: &PadMeasurement, theta: &Vector4<f64>) -> Vector4<f64> {
    let mut e = z - theta;
    e[3] = wrap_angle(e[3]);
    e
}

/// One identity-regressor RLS step.
pub fn rls_update(est: &RlsPadEstimate, z: &PadMeasurement, r: &Matrix4<f64>) -> RlsPadEstimate {
    let p = est.covariance / est.lambda;
    let s = p + r;
    let k = match s.try_inverse() {
        Some(si) => p * si,
        None => return est.clone(),
    };
    let mut theta = est.theta + k * innovation(z, &est.theta);
    theta[3] = wrap_angle(theta[3]);
    // (I - K) P rewritten as K R avoids cancellation when P >> R.
    let pn = k * r;
    RlsPadEstimate {
        theta,
        covariance: 0.5 * (pn + pn.transpose()),
        lambda: est.lambda,
        sample_count: est.sample_count + 1,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust start from the first hover window: per-component median, with the
/// covariance of the mean taken from the window scatter plus the measurement
/// noise so that it stays positive definite.
pub fn rls_initialize(
    window: &[PadMeasurement],
    r: &Matrix4<f64>,
    lambda: f64,
    k_min: usize,
) -> Result<RlsPadEstimate, VisionError> {
    if window.len() < k_min.max(1) {
        return Err(VisionError::DetectionTimeout { got: window.len(), need: k_min.max(1) });
    }
    let mut theta = Vector4::zeros();
    for i in 0..3 {
        theta[i] = median(window.iter().map(|z| z[i]).collect());
    }
    // Yaw median relative to the first sample avoids the wrap seam.
    let y0 = window[0][3];
    theta[3] = wrap_angle(y0 + median(window.iter().map(|z| wrap_angle(z[3] - y0)).collect()));
    let n = window.len() as f64;
    let scatter = window.iter().fold(Matrix4::zeros(), |acc, z| {
        let e = innovation(z, &theta);
        acc + e * e.transpose()
    }) / n;
    let mut est = RlsPadEstimate::with_prior(theta, (scatter + r) / n, lambda);
    est.sample_count = window.len();
    Ok(est)
}

/// Pad pose in the world from a camera pose in the landing frame and the
/// vehicle's estimated body pose.
pub fn pad_pose_measurement(
    cam_in_landing: &CameraPoseEstimate,
    body_position: &Vec3,
    body_attitude: &UnitQuat,
    camera: &CameraModel,
) -> PadMeasurement {
    let wc = CameraPose::from_body(body_position, body_attitude, camera);
    let r_wl = rotmat(&wc.rotation) * rotmat(&cam_in_landing.orientation).transpose();
    let t_wl = wc.position - r_wl * cam_in_landing.position;
    Vector4::new(t_wl.x, t_wl.y, t_wl.z, r_wl[(1, 0)].atan2(r_wl[(0, 0)]))
}

/// Height of the vehicle reference point above the estimated landing point.
pub fn bundle_height(vehicle_z: f64, pad: &RlsPadEstimate) -> f64 {
    vehicle_z - pad.theta[2]
}
