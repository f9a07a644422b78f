//! Multi-sensor error-state EKF.
//!
//! Nominal state: position, velocity, attitude, gyro and accelerometer
//! biases, GPS antenna lever arm, IMU-to-magnetometer rotation, world field
//! direction, pressure-height bias and pressure-sensor lever arm. The error
//! state has 28 components, attitudes as local small angles
//! (`q_true = q̂ ⊗ exp(δθ)`).

mod init;
mod measure;
mod msf;
mod propagate;

pub use init::{init_filter, InitWindow};
pub use measure::{predict_measurement, update, Measurement, MeasurementKind, UpdateStats};
pub use msf::{CorrectionOutcome, MsfFilter};
pub use propagate::propagate;

use crate::geometry::{apply_small_angle, UnitQuat, Vec3};
use nalgebra::{Quaternion, SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const N_ERR: usize = 28;
pub const I_P: usize = 0;
pub const I_V: usize = 3;
pub const I_TH: usize = 6;
pub const I_BW: usize = 9;
pub const I_BA: usize = 12;
pub const I_PIG: usize = 15;
pub const I_TIM: usize = 18;
pub const I_MW: usize = 21;
pub const I_BP: usize = 24;
pub const I_PIP: usize = 25;
/// Number of error states driven by the IMU; the rest are constant
/// calibration states.
pub const N_DYN: usize = 15;

pub type ErrorCovariance = SMatrix<f64, N_ERR, N_ERR>;
pub type ErrorVector = SVector<f64, N_ERR>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("initialization rejected: accelerometer variance {0:.4} above motion threshold")]
    ExcessiveMotion(f64),
    #[error("initialization needs {0} samples")]
    MissingData(&'static str),
    #[error("measurement noise covariance is not positive definite")]
    InvalidNoise,
    #[error("measurement kind {0:?} needs the gyro rate")]
    MissingGyro(MeasurementKind),
    #[error("measurement dimension mismatch for {0:?}")]
    Dimension(MeasurementKind),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub p_wi: Vec3,
    pub v_wi: Vec3,
    pub q_wi: UnitQuat,
    pub b_w: Vec3,
    pub b_a: Vec3,
    pub p_ig: Vec3,
    pub q_im: UnitQuat,
    pub m_w: Vec3,
    pub b_p: f64,
    pub p_ip: Vec3,
}

impl FilterState {
    /// State with calibration blocks taken from the configured priors.
    pub fn from_priors(p: Vec3, v: Vec3, q: UnitQuat, cfg: &FilterConfig) -> Self {
        Self {
            p_wi: p,
            v_wi: v,
            q_wi: q,
            b_w: Vec3::zeros(),
            b_a: Vec3::zeros(),
            p_ig: Vec3::from(cfg.gps_lever_arm),
            q_im: cfg.imu_to_mag(),
            m_w: cfg.field_world(),
            b_p: 0.0,
            p_ip: Vec3::from(cfg.pressure_lever_arm),
        }
    }

    /// `x ⊞ δx` without renormalizing the field direction.
    pub fn boxplus(&self, dx: &ErrorVector) -> Self {
        let v3 = |i: usize| Vec3::new(dx[i], dx[i + 1], dx[i + 2]);
        Self {
            p_wi: self.p_wi + v3(I_P),
            v_wi: self.v_wi + v3(I_V),
            q_wi: apply_small_angle(&self.q_wi, &v3(I_TH)),
            b_w: self.b_w + v3(I_BW),
            b_a: self.b_a + v3(I_BA),
            p_ig: self.p_ig + v3(I_PIG),
            q_im: apply_small_angle(&self.q_im, &v3(I_TIM)),
            m_w: self.m_w + v3(I_MW),
            b_p: self.b_p + dx[I_BP],
            p_ip: self.p_ip + v3(I_PIP),
        }
    }

    /// Applies a correction and restores the unit field direction.
    pub fn inject(&self, dx: &ErrorVector) -> Self {
        let mut s = self.boxplus(dx);
        s.m_w = s.m_w.normalize();
        s
    }

    pub fn is_finite(&self) -> bool {
        [self.p_wi, self.v_wi, self.b_w, self.b_a, self.p_ig, self.m_w, self.p_ip]
            .iter()
            .all(crate::geometry::is_finite)
            && self.b_p.is_finite()
            && self.q_wi.coords.iter().all(|c| c.is_finite())
    }
}

/// Filter tuning, measurement noise and calibration priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub accel_noise_density: f64,
    pub gyro_noise_density: f64,
    pub accel_bias_walk: f64,
    pub gyro_bias_walk: f64,
    pub baro_bias_walk: f64,
    pub field_walk: f64,

    pub gps_position_std: [f64; 3],
    pub gps_velocity_std: f64,
    pub baro_std: f64,
    pub mag_std: f64,
    pub direct_position_std: f64,

    /// Initial standard deviations.
    pub init_position_std: f64,
    pub init_velocity_std: f64,
    pub init_tilt_std: f64,
    pub init_yaw_std: f64,
    pub init_gyro_bias_std: f64,
    pub init_accel_bias_std: f64,
    pub init_lever_arm_std: f64,
    pub init_mag_rotation_std: f64,
    pub init_field_std: f64,
    pub init_baro_bias_std: f64,

    pub gps_lever_arm: [f64; 3],
    pub pressure_lever_arm: [f64; 3],
    pub imu_to_mag: [f64; 4],
    pub field_world: [f64; 3],

    /// χ² gate probability; measurements beyond it are rejected.
    pub gate_probability: f64,
    /// Largest accepted accelerometer variance (sum over axes) during the
    /// static initialization window, (m/s²)².
    pub init_motion_threshold: f64,
    /// Age of the oldest retained state snapshot, s.
    pub buffer_horizon: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let imu = crate::sensors::ImuParams::default();
        let gps = crate::sensors::GpsParams::default();
        let baro = crate::sensors::BaroParams::default();
        let mag = crate::sensors::MagParams::default();
        Self {
            accel_noise_density: imu.accel_noise_density,
            gyro_noise_density: imu.gyro_noise_density,
            accel_bias_walk: imu.accel_bias_walk,
            gyro_bias_walk: imu.gyro_bias_walk,
            baro_bias_walk: baro.drift_walk,
            field_walk: 1e-5,
            gps_position_std: gps.position_std,
            gps_velocity_std: gps.velocity_std,
            baro_std: baro.height_std,
            mag_std: mag.direction_std,
            direct_position_std: 0.001,
            init_position_std: 0.5,
            init_velocity_std: 0.05,
            init_tilt_std: 0.02,
            init_yaw_std: 0.05,
            init_gyro_bias_std: imu.gyro_bias_init_std,
            init_accel_bias_std: imu.accel_bias_init_std,
            init_lever_arm_std: 0.005,
            init_mag_rotation_std: 0.005,
            init_field_std: 0.005,
            init_baro_bias_std: 0.5,
            gps_lever_arm: gps.lever_arm,
            pressure_lever_arm: baro.lever_arm,
            imu_to_mag: mag.imu_to_mag,
            field_world: mag.field_world,
            gate_probability: 0.999,
            init_motion_threshold: 0.25,
            buffer_horizon: 1.0,
        }
    }
}

impl FilterConfig {
    pub fn imu_to_mag(&self) -> UnitQuat {
        let [w, x, y, z] = self.imu_to_mag;
        UnitQuat::new_normalize(Quaternion::new(w, x, y, z))
    }

    pub fn field_world(&self) -> Vec3 {
        Vec3::from(self.field_world).normalize()
    }

    /// Diagonal initial covariance, cross-correlations zero.
    pub fn initial_covariance(&self) -> ErrorCovariance {
        let mut d = ErrorVector::zeros();
        let mut set = |i: usize, n: usize, s: f64| {
            for k in i..i + n {
                d[k] = s * s;
            }
        };
        set(I_P, 3, self.init_position_std);
        set(I_V, 3, self.init_velocity_std);
        set(I_TH, 2, self.init_tilt_std);
        set(I_TH + 2, 1, self.init_yaw_std);
        set(I_BW, 3, self.init_gyro_bias_std);
        set(I_BA, 3, self.init_accel_bias_std);
        set(I_PIG, 3, self.init_lever_arm_std);
        set(I_TIM, 3, self.init_mag_rotation_std);
        set(I_MW, 3, self.init_field_std);
        set(I_BP, 1, self.init_baro_bias_std);
        set(I_PIP, 3, self.init_lever_arm_std);
        ErrorCovariance::from_diagonal(&d)
    }
}

/// Smallest eigenvalue of the symmetric part and the largest asymmetry.
pub fn covariance_health(p: &ErrorCovariance) -> (f64, f64) {
    let asym = (p - p.transpose()).amax();
    let sym = 0.5 * (p + p.transpose());
    let min_eig = sym.symmetric_eigenvalues().min();
    (min_eig, asym)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxplus_zero_is_identity() {
        let cfg = FilterConfig::default();
        let s = FilterState::from_priors(Vec3::new(1.0, 2.0, 3.0), Vec3::zeros(), UnitQuat::identity(), &cfg);
        assert_eq!(s.boxplus(&ErrorVector::zeros()), s);
        let (e, a) = covariance_health(&cfg.initial_covariance());
        assert!(e > 0.0 && a == 0.0);
    }

    #[test]
    fn inject_renormalizes_field() {
        let cfg = FilterConfig::default();
        let s = FilterState::from_priors(Vec3::zeros(), Vec3::zeros(), UnitQuat::identity(), &cfg);
        let mut dx = ErrorVector::zeros();
        dx[I_MW] = 0.3;
        assert!((s.inject(&dx).m_w.norm() - 1.0).abs() < 1e-12);
    }
}
