use super::{AutopilotOutput, EventKind, MotorMode, NavState};
use crate::trajectory::{plan_descent_profile, VerticalProfile};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmergencyConfig {
    pub descent_speed: f64,
    pub descent_ramp: f64,
    /// Estimated |v_z| below which the vehicle is taken to be on the ground.
    pub touchdown_speed: f64,
    pub touchdown_hold: f64,
    /// The touchdown check arms after this long even if the vehicle never
    /// picked up speed (triggered on the ground), s.
    pub arm_time: f64,
}

impl Default for EmergencyConfig {
    fn default() -> Self {
        Self { descent_speed: 0.5, descent_ramp: 0.5, touchdown_speed: 0.05, touchdown_hold: 0.5, arm_time: 1.0 }
    }
}

/// Straight descent at the current horizontal position until the vertical
/// speed stays near zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmergencyLandingAutopilot {
    pub config: EmergencyConfig,
    start: f64,
    xy: [f64; 2],
    yaw: f64,
    profile: Option<VerticalProfile>,
    armed: bool,
    still_since: Option<f64>,
}

impl EmergencyLandingAutopilot {
    pub fn new(config: EmergencyConfig) -> Self {
        Self { config, start: 0.0, xy: [0.0; 2], yaw: 0.0, profile: None, armed: false, still_since: None }
    }

    pub fn wake(&mut self, nav: &NavState) {
        self.start = nav.time;
        self.xy = [nav.position.x, nav.position.y];
        self.yaw = nav.yaw;
        self.profile = Some(plan_descent_profile(nav.position.z, self.config.descent_speed, self.config.descent_ramp));
        self.armed = false;
        self.still_since = None;
    }

    pub fn is_done(&self) -> bool {
        self.profile.is_none()
    }

    pub fn step(&mut self, nav: &NavState) -> AutopilotOutput {
        let Some(profile) = self.profile else {
            return AutopilotOutput::new(MotorMode::Off);
        };
        let c = &self.config;
        let t = nav.time;
        let vz = nav.velocity.z.abs();
        // Arming avoids declaring touchdown at the hover the descent starts from.
        self.armed |= vz > 0.5 * c.descent_speed || t - self.start >= c.arm_time;
        if self.armed && vz < c.touchdown_speed {
            let s0 = *self.still_since.get_or_insert(t);
            if t - s0 >= c.touchdown_hold - 1e-9 {
                self.profile = None;
                return AutopilotOutput::new(MotorMode::Off).with_event(EventKind::Touchdown, t);
            }
        } else {
            self.still_since = None;
        }
        AutopilotOutput::new(MotorMode::Flight(profile.sample(t - self.start, self.xy, self.yaw)))
    }
}
