use super::{AutopilotOutput, EventKind, HomeRecord, MotorMode, NavState};
use crate::trajectory::{plan_vertical_velocity_profile, FlatSample, VerticalProfile};
use log::warn;
use serde::{Deserialize, Serialize};

/// Side effects the takeoff sequence needs from the vehicle.
pub trait TakeoffServices {
    /// Called after the idle spin-up; true when every motor responded as
    /// modeled.
    fn motor_check(&mut self) -> bool;
    /// Re-initializes the estimator from the samples of the last window.
    fn reinit_filter(&mut self) -> Result<(), String>;
    fn persist_home(&mut self, rec: &HomeRecord) -> Result<(), String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TakeoffConfig {
    /// Idle spin-up before the motor check, s.
    pub motor_check_time: f64,
    /// Sample window collected before each filter re-initialization, s.
    pub init_window: f64,
    pub max_init_attempts: u32,
    /// Climb height above the takeoff point, m.
    pub safe_altitude: f64,
    pub climb_speed: f64,
    pub climb_ramp: f64,
    /// Tolerance on the final height, m.
    pub altitude_tolerance: f64,
}

impl Default for TakeoffConfig {
    fn default() -> Self {
        Self {
            motor_check_time: 1.0,
            init_window: 1.0,
            max_init_attempts: 3,
            safe_altitude: 4.0,
            climb_speed: 1.0,
            climb_ramp: 0.5,
            altitude_tolerance: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TakeoffPhase {
    MotorCheck { start: f64 },
    Reinit { start: f64, attempt: u32 },
    PersistHome,
    Climb { start: f64, profile: VerticalProfile, xy: [f64; 2], yaw: f64 },
    Done { hold: FlatSample },
    Failed,
}

/// Motor check, filter re-initialization, home persistence, then a
/// velocity-profiled climb to the safe altitude.
#[derive(Debug, Clone, PartialEq)]
pub struct TakeoffAutopilot {
    pub config: TakeoffConfig,
    phase: TakeoffPhase,
    home: Option<HomeRecord>,
}

impl TakeoffAutopilot {
    pub fn new(config: TakeoffConfig) -> Self {
        Self { config, phase: TakeoffPhase::Failed, home: None }
    }

    pub fn wake(&mut self, nav: &NavState) {
        self.phase = TakeoffPhase::MotorCheck { start: nav.time };
        self.home = None;
    }

    pub fn phase(&self) -> &TakeoffPhase {
        &self.phase
    }

    /// Home record written during this takeoff.
    pub fn home(&self) -> Option<&HomeRecord> {
        self.home.as_ref()
    }

    pub fn step<S: TakeoffServices>(&mut self, nav: &NavState, services: &mut S) -> AutopilotOutput {
        let c = &self.config;
        let t = nav.time;
        match self.phase.clone() {
            TakeoffPhase::MotorCheck { start } => {
                if t - start < c.motor_check_time - 1e-9 {
                    return AutopilotOutput::new(MotorMode::Idle);
                }
                if !services.motor_check() {
                    self.phase = TakeoffPhase::Failed;
                    return AutopilotOutput::new(MotorMode::Off).with_event(EventKind::MotorCheckFailed, t);
                }
                self.phase = TakeoffPhase::Reinit { start: t, attempt: 1 };
                AutopilotOutput::new(MotorMode::Idle)
            }
            TakeoffPhase::Reinit { start, attempt } => {
                if t - start < c.init_window - 1e-9 {
                    return AutopilotOutput::new(MotorMode::Idle);
                }
                match services.reinit_filter() {
                    Ok(()) => self.phase = TakeoffPhase::PersistHome,
                    Err(e) if attempt < c.max_init_attempts => {
                        warn!("filter init attempt {attempt} failed: {e}");
                        self.phase = TakeoffPhase::Reinit { start: t, attempt: attempt + 1 };
                    }
                    Err(e) => {
                        warn!("filter init failed after {attempt} attempts: {e}");
                        self.phase = TakeoffPhase::Failed;
                        return AutopilotOutput::new(MotorMode::Off).with_event(EventKind::AutopilotFailed, t);
                    }
                }
                AutopilotOutput::new(MotorMode::Idle)
            }
            TakeoffPhase::PersistHome => {
                let rec = HomeRecord::from_position(&nav.position, t);
                if let Err(e) = services.persist_home(&rec) {
                    warn!("home record not persisted: {e}");
                    self.phase = TakeoffPhase::Failed;
                    return AutopilotOutput::new(MotorMode::Off).with_event(EventKind::AutopilotFailed, t);
                }
                self.home = Some(rec);
                let profile = plan_vertical_velocity_profile(nav.position.z, rec.altitude + c.safe_altitude, c.climb_speed, c.climb_ramp);
                let xy = [rec.x, rec.y];
                self.phase = TakeoffPhase::Climb { start: t, profile, xy, yaw: nav.yaw };
                AutopilotOutput::new(MotorMode::Flight(profile.sample(0.0, xy, nav.yaw)))
            }
            TakeoffPhase::Climb { start, profile, xy, yaw } => {
                let tau = t - start;
                let sample = profile.sample(tau, xy, yaw);
                let target = profile.position(profile.duration());
                if tau >= profile.duration() && nav.position.z >= target - c.altitude_tolerance {
                    self.phase = TakeoffPhase::Done { hold: sample };
                    return AutopilotOutput::new(MotorMode::Flight(sample)).with_event(EventKind::TakeoffComplete, t);
                }
                AutopilotOutput::new(MotorMode::Flight(sample))
            }
            TakeoffPhase::Done { hold } => AutopilotOutput::new(MotorMode::Flight(hold)),
            TakeoffPhase::Failed => AutopilotOutput::new(MotorMode::Off),
        }
    }
}
