//! Ground-truth multirotor plant: rigid-body dynamics, motors, battery, wind and
//! charging-pad contact.

mod battery;
mod contact;
mod dynamics;
mod motor;
mod wind;

pub use battery::{battery_step, BatteryLoad, BatteryMode, BatteryParams, BatteryState};
pub use contact::{pad_contact, ContactKind, PadGeometry};
pub use dynamics::{
    allocation_matrix, linear_acceleration, motor_thrusts, step_dynamics, MOTOR_LAYOUT,
};
pub use motor::{MotorMap, MotorOutput};
pub use wind::{WindModel, WindState};

use crate::geometry::{UnitQuat, Vec3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Physics clock, Hz. Every other loop is a decimation of it.
pub const PHYSICS_RATE_HZ: u32 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("non-finite value in plant input: {0}")]
    NonFinite(&'static str),
    #[error("invalid vehicle parameter `{0}`: must be strictly positive")]
    InvalidParam(&'static str),
    #[error("time step {0} s outside (0, 0.01]")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub mass: f64,
    pub inertia: [f64; 3],
    pub arm_length: f64,
    /// Thrust per squared rotor speed, N/(rad/s)².
    pub thrust_coeff: f64,
    /// Reaction torque per squared rotor speed, N·m/(rad/s)².
    pub yaw_torque_coeff: f64,
    pub motor_time_constant: f64,
    pub max_motor_thrust: f64,
    /// Linear drag, N/(m/s), against air-relative velocity.
    pub drag_coeff: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1.6,
            inertia: [0.0154, 0.0154, 0.028],
            arm_length: 0.21,
            thrust_coeff: 8.55e-6,
            yaw_torque_coeff: 1.37e-7,
            motor_time_constant: 0.02,
            max_motor_thrust: 8.0,
            drag_coeff: 0.3,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let checks: [(&'static str, f64); 10] = [
            ("mass", self.mass),
            ("inertia[0]", self.inertia[0]),
            ("inertia[1]", self.inertia[1]),
            ("inertia[2]", self.inertia[2]),
            ("arm_length", self.arm_length),
            ("thrust_coeff", self.thrust_coeff),
            ("yaw_torque_coeff", self.yaw_torque_coeff),
            ("motor_time_constant", self.motor_time_constant),
            ("max_motor_thrust", self.max_motor_thrust),
            ("drag_coeff", self.drag_coeff),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlantError::InvalidParam(name));
            }
        }
        Ok(())
    }

    pub fn inertia(&self) -> Vec3 {
        Vec3::from(self.inertia)
    }

    /// Yaw torque per newton of rotor thrust, m.
    pub fn torque_per_thrust(&self) -> f64 {
        self.yaw_torque_coeff / self.thrust_coeff
    }

    pub fn max_motor_speed(&self) -> f64 {
        (self.max_motor_thrust / self.thrust_coeff).sqrt()
    }

    pub fn motor_map(&self) -> MotorMap {
        MotorMap::new(self.max_motor_thrust, self.thrust_coeff)
    }

    pub fn hover_thrust_per_motor(&self) -> f64 {
        self.mass * crate::geometry::GRAVITY / 4.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrueVehicleState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: UnitQuat,
    pub body_rates: Vec3,
    pub motor_speeds: [f64; 4],
    pub on_ground: bool,
    pub time: f64,
}

impl TrueVehicleState {
    /// Vehicle at rest on a surface with motors stopped.
    pub fn landed(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            attitude: crate::geometry::yaw_quat(yaw),
            body_rates: Vec3::zeros(),
            motor_speeds: [0.0; 4],
            on_ground: true,
            time: 0.0,
        }
    }

    /// Vehicle hovering with motors at their steady hover speed.
    pub fn hovering(position: Vec3, yaw: f64, params: &VehicleParams) -> Self {
        let w = (params.hover_thrust_per_motor() / params.thrust_coeff).sqrt();
        Self {
            position,
            velocity: Vec3::zeros(),
            attitude: crate::geometry::yaw_quat(yaw),
            body_rates: Vec3::zeros(),
            motor_speeds: [w; 4],
            on_ground: false,
            time: 0.0,
        }
    }
}
