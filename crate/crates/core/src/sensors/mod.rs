//! Sensor measurement generation from ground truth.
//!
//! Every sampler is a pure function of the true state, its parameters and an
//! RNG stream, plus an explicit bias state where the sensor has one.

mod tags;

pub use tags::{detect_from_pose, sample_tag_detections, TagDetection, TagDetectionSet, TagVisibility};

use crate::geometry::{rotmat, skew, UnitQuat, Vec3, GRAVITY};
use crate::plant::TrueVehicleState;
use nalgebra::{Quaternion, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const IMU_RATE_HZ: f64 = 200.0;
pub const GPS_RATE_HZ: f64 = 20.0;
pub const BARO_RATE_HZ: f64 = 20.0;
pub const MAG_RATE_HZ: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorProfile {
    /// Motion-capture position replaces GPS.
    Indoor,
    Outdoor,
}

pub(crate) fn gauss<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn gauss3<R: Rng>(rng: &mut R, sigma: &Vec3) -> Vec3 {
    let (a, b, c) = (gauss(rng), gauss(rng), gauss(rng));
    Vec3::new(sigma.x * a, sigma.y * b, sigma.z * c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Specific force in the body frame, m/s².
    pub accel: Vec3,
    /// Body angular rate, rad/s.
    pub gyro: Vec3,
    pub time: f64,
}

/// Continuous-time IMU noise model. Densities are per √Hz; the per-sample
/// standard deviation is `density * sqrt(rate)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImuParams {
    pub accel_noise_density: f64,
    pub gyro_noise_density: f64,
    pub accel_bias_walk: f64,
    pub gyro_bias_walk: f64,
    /// Standard deviation of the turn-on biases drawn at the start of a run.
    pub accel_bias_init_std: f64,
    pub gyro_bias_init_std: f64,
}

impl Default for ImuParams {
    fn default() -> Self {
        Self {
            accel_noise_density: 0.01,
            gyro_noise_density: 0.001,
            accel_bias_walk: 1e-3,
            gyro_bias_walk: 1e-4,
            accel_bias_init_std: 0.05,
            gyro_bias_init_std: 0.003,
        }
    }
}

impl ImuParams {
    pub fn noiseless() -> Self {
        Self {
            accel_noise_density: 0.0,
            gyro_noise_density: 0.0,
            accel_bias_walk: 0.0,
            gyro_bias_walk: 0.0,
            accel_bias_init_std: 0.0,
            gyro_bias_init_std: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuBiases {
    pub accel: Vec3,
    pub gyro: Vec3,
}

impl ImuBiases {
    pub fn zero() -> Self {
        Self { accel: Vec3::zeros(), gyro: Vec3::zeros() }
    }

    pub fn draw<R: Rng>(params: &ImuParams, rng: &mut R) -> Self {
        Self {
            accel: gauss3(rng, &Vec3::repeat(params.accel_bias_init_std)),
            gyro: gauss3(rng, &Vec3::repeat(params.gyro_bias_init_std)),
        }
    }
}

/// Samples the IMU at the true state. `accel_world` is the true world-frame
/// acceleration at this instant. Biases advance by one random-walk step of
/// length `1 / IMU_RATE_HZ` after the sample is taken.
pub fn sample_imu<R: Rng>(
    truth: &TrueVehicleState,
    accel_world: &Vec3,
    biases: &mut ImuBiases,
    params: &ImuParams,
    rng: &mut R,
) -> ImuSample {
    let dt = 1.0 / IMU_RATE_HZ;
    let c = rotmat(&truth.attitude);
    let specific = c.transpose() * (accel_world - crate::geometry::gravity());
    let acc_sd = params.accel_noise_density / dt.sqrt();
    let gyr_sd = params.gyro_noise_density / dt.sqrt();
    let sample = ImuSample {
        accel: specific + biases.accel + gauss3(rng, &Vec3::repeat(acc_sd)),
        gyro: truth.body_rates + biases.gyro + gauss3(rng, &Vec3::repeat(gyr_sd)),
        time: truth.time,
    };
    biases.accel += gauss3(rng, &Vec3::repeat(params.accel_bias_walk * dt.sqrt()));
    biases.gyro += gauss3(rng, &Vec3::repeat(params.gyro_bias_walk * dt.sqrt()));
    sample
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsSample {
    /// Antenna position, world frame.
    pub position: Vec3,
    pub velocity_2d: Vector2<f64>,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpsParams {
    pub position_std: [f64; 3],
    pub velocity_std: f64,
    /// Antenna position in the body frame, m.
    pub lever_arm: [f64; 3],
}

impl Default for GpsParams {
    fn default() -> Self {
        Self { position_std: [0.8, 0.8, 1.5], velocity_std: 0.1, lever_arm: [0.05, 0.0, 0.12] }
    }
}

/// Antenna position `p + C p_ig` and horizontal antenna velocity
/// `(v + C (ω × p_ig))_xy`, each with white noise.
pub fn sample_gps<R: Rng>(truth: &TrueVehicleState, params: &GpsParams, rng: &mut R) -> GpsSample {
    let c = rotmat(&truth.attitude);
    let arm = Vec3::from(params.lever_arm);
    let pos = truth.position + c * arm + gauss3(rng, &Vec3::from(params.position_std));
    let vel = truth.velocity + c * (skew(&truth.body_rates) * arm);
    let (nx, ny) = (gauss(rng), gauss(rng));
    GpsSample {
        position: pos,
        velocity_2d: Vector2::new(vel.x + params.velocity_std * nx, vel.y + params.velocity_std * ny),
        time: truth.time,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaroSample {
    /// Pressure height, m.
    pub height: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaroParams {
    pub height_std: f64,
    /// Random-walk density of the pressure-height bias, m/√s.
    pub drift_walk: f64,
    /// Pressure-height offset at the start of a run, m.
    pub initial_offset: f64,
    /// Pressure sensor position in the body frame, m.
    pub lever_arm: [f64; 3],
}

impl Default for BaroParams {
    fn default() -> Self {
        Self { height_std: 0.3, drift_walk: 0.003, initial_offset: 2.5, lever_arm: [0.0, 0.0, 0.03] }
    }
}

/// `(p + C p_ip)_z + bias + noise`; the bias drifts by one 20 Hz step.
pub fn sample_baro<R: Rng>(truth: &TrueVehicleState, bias: &mut f64, params: &BaroParams, rng: &mut R) -> BaroSample {
    let c = rotmat(&truth.attitude);
    let h = (truth.position + c * Vec3::from(params.lever_arm)).z;
    let s = BaroSample { height: h + *bias + params.height_std * gauss(rng), time: truth.time };
    *bias += params.drift_walk * (1.0 / BARO_RATE_HZ).sqrt() * gauss(rng);
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagSample {
    /// Normalized field direction in the magnetometer frame.
    pub field: Vec3,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MagParams {
    /// World field direction (ENU), normalized on use.
    pub field_world: [f64; 3],
    /// IMU-to-magnetometer rotation, scalar-first.
    pub imu_to_mag: [f64; 4],
    /// Per-component noise on the unit field vector, rad.
    pub direction_std: f64,
}

impl Default for MagParams {
    fn default() -> Self {
        let inc = 60f64.to_radians();
        Self {
            field_world: [0.0, inc.cos(), -inc.sin()],
            imu_to_mag: [1.0, 0.0, 0.0, 0.0],
            direction_std: 1f64.to_radians(),
        }
    }
}

impl MagParams {
    pub fn field_world(&self) -> Vec3 {
        Vec3::from(self.field_world).normalize()
    }

    pub fn imu_to_mag(&self) -> UnitQuat {
        let [w, x, y, z] = self.imu_to_mag;
        UnitQuat::new_normalize(Quaternion::new(w, x, y, z))
    }
}

/// `C(q_im)ᵀ C(q_wi)ᵀ m_w` plus isotropic noise on the unit vector.
pub fn sample_mag<R: Rng>(truth: &TrueVehicleState, params: &MagParams, rng: &mut R) -> MagSample {
    let m = rotmat(&params.imu_to_mag()).transpose() * rotmat(&truth.attitude).transpose() * params.field_world();
    MagSample { field: m + gauss3(rng, &Vec3::repeat(params.direction_std)), time: truth.time }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionSample {
    pub position: Vec3,
    pub time: f64,
}

/// Motion-capture style direct position of the IMU reference point.
pub fn sample_direct_position<R: Rng>(truth: &TrueVehicleState, std: f64, rng: &mut R) -> PositionSample {
    PositionSample { position: truth.position + gauss3(rng, &Vec3::repeat(std)), time: truth.time }
}

/// Expected specific force of a stationary, level vehicle.
pub fn static_specific_force() -> Vec3 {
    Vec3::new(0.0, 0.0, GRAVITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::yaw_quat;
    use crate::plant::VehicleParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn at(p: Vec3, yaw: f64) -> TrueVehicleState {
        TrueVehicleState::hovering(p, yaw, &VehicleParams::default())
    }

    #[test]
    fn hover_and_free_fall_specific_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = ImuBiases::zero();
        let s = sample_imu(&at(Vec3::zeros(), 0.4), &Vec3::zeros(), &mut b, &ImuParams::noiseless(), &mut rng);
        assert!((s.accel - Vec3::new(0.0, 0.0, GRAVITY)).norm() < 1e-12);
        assert_eq!(s.gyro, Vec3::zeros());
        let s = sample_imu(&at(Vec3::zeros(), 0.4), &crate::geometry::gravity(), &mut b, &ImuParams::noiseless(), &mut rng);
        assert!(s.accel.norm() < 1e-12);
    }

    #[test]
    fn bias_random_walk_variance() {
        let params = ImuParams { accel_bias_walk: 0.02, ..ImuParams::noiseless() };
        let n_steps = 50;
        let trials = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = at(Vec3::zeros(), 0.0);
        let mut sq = 0.0;
        for _ in 0..trials {
            let mut b = ImuBiases::zero();
            for _ in 0..n_steps {
                sample_imu(&truth, &Vec3::zeros(), &mut b, &params, &mut rng);
            }
            sq += b.accel.x * b.accel.x;
        }
        let var = sq / trials as f64;
        let expected = n_steps as f64 * 0.02f64.powi(2) / IMU_RATE_HZ;
        assert!((var / expected - 1.0).abs() < 0.05, "ratio {}", var / expected);
    }

    fn quiet_gps(arm: [f64; 3]) -> GpsParams {
        GpsParams { position_std: [0.0; 3], velocity_std: 0.0, lever_arm: arm }
    }

    #[test]
    fn gps_lever_arm() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = sample_gps(&at(Vec3::new(1.0, 2.0, 3.0), 0.0), &quiet_gps([0.1, 0.0, 0.0]), &mut rng);
        assert!((g.position - Vec3::new(1.1, 2.0, 3.0)).norm() < 1e-12);
        let g = sample_gps(&at(Vec3::new(1.0, 2.0, 3.0), FRAC_PI_2), &quiet_gps([0.1, 0.0, 0.0]), &mut rng);
        assert!((g.position - Vec3::new(1.0, 2.1, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn gps_velocity_from_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = at(Vec3::zeros(), 0.0);
        s.body_rates = Vec3::new(0.0, 0.0, 1.0);
        let g = sample_gps(&s, &quiet_gps([0.1, 0.0, 0.0]), &mut rng);
        assert!((g.velocity_2d - Vector2::new(0.0, 0.1)).norm() < 1e-12);
    }

    #[test]
    fn mag_mean_direction() {
        let params = MagParams { imu_to_mag: [0.9, 0.1, -0.2, 0.3], ..Default::default() };
        let truth = TrueVehicleState { attitude: crate::geometry::from_euler(0.1, -0.2, 1.0), ..at(Vec3::zeros(), 0.0) };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut sum = Vec3::zeros();
        let n = 20_000;
        for _ in 0..n {
            sum += sample_mag(&truth, &params, &mut rng).field;
        }
        let expected = rotmat(&params.imu_to_mag()).transpose()
            * rotmat(&truth.attitude).transpose()
            * params.field_world();
        let mean = sum / n as f64;
        // Standard error per component is 1°/sqrt(n) ~ 1.2e-4.
        assert!((mean - expected).norm() < 1e-3);
        assert!((mean.norm() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn baro_uses_pressure_lever_arm() {
        let params = BaroParams { height_std: 0.0, drift_walk: 0.0, initial_offset: 0.0, lever_arm: [0.0, 0.0, -0.05] };
        let mut bias = 0.2;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_baro(&at(Vec3::new(0.0, 0.0, 10.0), 0.0), &mut bias, &params, &mut rng);
        assert!((s.height - 10.15).abs() < 1e-12);
    }

    #[test]
    fn streams_are_deterministic() {
        let truth = TrueVehicleState { attitude: yaw_quat(0.3), ..at(Vec3::new(1.0, 2.0, 3.0), 0.0) };
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            (0..10).map(|_| sample_gps(&truth, &GpsParams::default(), &mut rng).position).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }
}
