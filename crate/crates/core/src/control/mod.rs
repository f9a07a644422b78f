//! Cascaded flight control: translation PID, quaternion attitude law,
//! feedback-linearizing body-rate loop and a roll/pitch-prioritizing mixer.

mod attitude;
mod mixer;
mod translation;

pub use attitude::{attitude_control, body_rate_control, desired_attitude, AttitudeController, AttitudeRefs};
pub use mixer::{mix_and_saturate, MotorCommand, SaturationFlags};
pub use translation::{TranslationController, TranslationGains};

use crate::geometry::{UnitQuat, Vec3, GRAVITY};
use crate::plant::VehicleParams;
use crate::trajectory::FlatSample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid gain {0}")]
    InvalidGain(&'static str),
}

/// Full gain set of the cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlGains {
    pub translation: TranslationGains,
    /// Roll/pitch attitude time constant, s.
    pub tau_tilt: f64,
    /// Yaw attitude time constant, s.
    pub tau_yaw: f64,
    /// Body-rate loop gains, 1/s.
    pub k_omega: [f64; 3],
}

impl Default for ControlGains {
    fn default() -> Self {
        // Rate loop at 25 rad/s (ζ ≈ 0.7 against the 20 ms motor lag),
        // tilt at 5 rad/s, position at ~1.7 rad/s.
        Self { translation: TranslationGains::default(), tau_tilt: 0.2, tau_yaw: 0.5, k_omega: [25.0, 25.0, 10.0] }
    }
}

impl ControlGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        self.translation.validate()?;
        if !(self.tau_tilt > 0.0 && self.tau_tilt.is_finite()) {
            return Err(ControlError::InvalidGain("tau_tilt"));
        }
        if !(self.tau_yaw > 0.0 && self.tau_yaw.is_finite()) {
            return Err(ControlError::InvalidGain("tau_yaw"));
        }
        if !self.k_omega.iter().all(|k| *k >= 0.0 && k.is_finite()) {
            return Err(ControlError::InvalidGain("k_omega"));
        }
        Ok(())
    }

    pub fn k_omega(&self) -> Vec3 {
        Vec3::from(self.k_omega)
    }
}

/// One inner-loop output, kept for logging.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub a_ref: Vec3,
    pub omega_ref: Vec3,
    pub thrust: f64,
    pub torques: Vec3,
    pub command: MotorCommand,
}

/// The full cascade. [`FlightController::guidance_step`] runs the
/// translation loop at the guidance rate; [`FlightController::inner_step`]
/// runs attitude, body-rate and mixing at the physics rate.
#[derive(Debug, Clone)]
pub struct FlightController {
    pub gains: ControlGains,
    pub params: VehicleParams,
    translation: TranslationController,
    attitude: AttitudeController,
    a_ref: Vec3,
    psi_ref: f64,
    omega_ff: Vec3,
}

impl FlightController {
    pub fn new(gains: ControlGains, params: VehicleParams) -> Self {
        Self {
            translation: TranslationController::new(gains.translation.clone()),
            attitude: AttitudeController::new(gains.tau_tilt, gains.tau_yaw),
            gains,
            params,
            a_ref: Vec3::new(0.0, 0.0, GRAVITY),
            psi_ref: 0.0,
            omega_ff: Vec3::zeros(),
        }
    }

    /// Clears integrator, pre-filter and held references.
    pub fn reset(&mut self) {
        self.translation.reset();
        self.attitude.reset();
        self.a_ref = Vec3::new(0.0, 0.0, GRAVITY);
        self.omega_ff = Vec3::zeros();
    }

    pub fn a_ref(&self) -> Vec3 {
        self.a_ref
    }

    pub fn translation(&self) -> &TranslationController {
        &self.translation
    }

    pub fn guidance_step(&mut self, sample: &FlatSample, p_est: &Vec3, v_est: &Vec3, dt: f64) -> Vec3 {
        self.a_ref = self.translation.step(sample, p_est, v_est, dt);
        self.psi_ref = sample.psi_ref;
        self.omega_ff = sample.omega_ff;
        self.a_ref
    }

    pub fn inner_step(&mut self, q_est: &UnitQuat, omega_est: &Vec3) -> ControlOutput {
        let refs = self.attitude.step(&self.a_ref, self.psi_ref, &self.omega_ff, q_est, self.params.mass);
        let torques = body_rate_control(&refs.omega_ref, omega_est, &self.params.inertia(), &self.gains.k_omega());
        let command = mix_and_saturate(&torques, refs.thrust, &self.params);
        ControlOutput { a_ref: self.a_ref, omega_ref: refs.omega_ref, thrust: refs.thrust, torques, command }
    }
}
