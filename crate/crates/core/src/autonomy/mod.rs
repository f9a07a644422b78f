//! Mission logic: a master state machine that only sequences, four
//! autopilots that produce guidance, a battery monitor and a durable home
//! record.

mod battery_monitor;
mod emergency;
mod events;
mod home;
mod landing;
mod master;
mod mission;
mod takeoff;

pub use battery_monitor::{BatteryMonitor, BatteryMonitorConfig};
pub use emergency::{EmergencyConfig, EmergencyLandingAutopilot};
pub use events::{parse_event_script, EventScript};
pub use home::{home_store_load, home_store_persist, HomeRecord, HomeStoreError};
pub use landing::{LandingAutopilot, LandingConfig, LandingPhase};
pub use master::{master_step, transition, AutonomyContext, MasterCommand, Transition};
pub use mission::{MissionAutopilot, MissionMode, MissionSpec, ReturnHomeAutopilot};
pub use takeoff::{TakeoffAutopilot, TakeoffConfig, TakeoffPhase, TakeoffServices};

use crate::geometry::Vec3;
use crate::trajectory::FlatSample;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MasterState {
    Idle,
    Charging,
    Takeoff,
    Mission,
    ReturnHome,
    Landing,
    Landed,
    EmergencyLanding,
    Fault,
}

impl MasterState {
    pub const ALL: [MasterState; 9] = [
        Self::Idle,
        Self::Charging,
        Self::Takeoff,
        Self::Mission,
        Self::ReturnHome,
        Self::Landing,
        Self::Landed,
        Self::EmergencyLanding,
        Self::Fault,
    ];

    pub const AIRBORNE: [MasterState; 4] = [Self::Takeoff, Self::Mission, Self::ReturnHome, Self::Landing];

    pub fn is_airborne(self) -> bool {
        Self::AIRBORNE.contains(&self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Idle => "IDLE",
            Self::Charging => "CHARGING",
            Self::Takeoff => "TAKEOFF",
            Self::Mission => "MISSION",
            Self::ReturnHome => "RETURN_HOME",
            Self::Landing => "LANDING",
            Self::Landed => "LANDED",
            Self::EmergencyLanding => "EMERGENCY_LANDING",
            Self::Fault => "FAULT",
        }
    }
}

impl fmt::Display for MasterState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MasterState {
    type Err = AutonomyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| AutonomyError::UnknownState(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    BatteryFull,
    BatteryLow,
    BatteryCritical,
    TakeoffComplete,
    MissionComplete,
    ArrivedHome,
    PadAcquired,
    Touchdown,
    ForceTakeoff,
    ForceLand,
    ReturnToHome,
    EmergencyLand,
    DetectionTimeout,
    MotorCheckFailed,
    /// An autopilot could not carry out its job: filter re-initialization
    /// retries exhausted, home record not persisted, or mission planning failed.
    AutopilotFailed,
}

impl EventKind {
    pub const ALL: [EventKind; 15] = [
        Self::BatteryFull,
        Self::BatteryLow,
        Self::BatteryCritical,
        Self::TakeoffComplete,
        Self::MissionComplete,
        Self::ArrivedHome,
        Self::PadAcquired,
        Self::Touchdown,
        Self::ForceTakeoff,
        Self::ForceLand,
        Self::ReturnToHome,
        Self::EmergencyLand,
        Self::DetectionTimeout,
        Self::MotorCheckFailed,
        Self::AutopilotFailed,
    ];

    /// User-forced events.
    pub const FORCED: [EventKind; 4] = [Self::ForceTakeoff, Self::ForceLand, Self::ReturnToHome, Self::EmergencyLand];

    pub fn name(self) -> &'static str {
        match self {
            Self::BatteryFull => "BatteryFull",
            Self::BatteryLow => "BatteryLow",
            Self::BatteryCritical => "BatteryCritical",
            Self::TakeoffComplete => "TakeoffComplete",
            Self::MissionComplete => "MissionComplete",
            Self::ArrivedHome => "ArrivedHome",
            Self::PadAcquired => "PadAcquired",
            Self::Touchdown => "Touchdown",
            Self::ForceTakeoff => "ForceTakeoff",
            Self::ForceLand => "ForceLand",
            Self::ReturnToHome => "ReturnToHome",
            Self::EmergencyLand => "EmergencyLand",
            Self::DetectionTimeout => "DetectionTimeout",
            Self::MotorCheckFailed => "MotorCheckFailed",
            Self::AutopilotFailed => "AutopilotFailed",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = AutonomyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| AutonomyError::UnknownEvent(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutonomyEvent {
    pub kind: EventKind,
    pub time: f64,
}

impl AutonomyEvent {
    pub fn new(kind: EventKind, time: f64) -> Self {
        Self { kind, time }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutonomyError {
    #[error("unknown master state {0:?}")]
    UnknownState(String),
    #[error("unknown event {0:?}")]
    UnknownEvent(String),
    #[error("event script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("mission has no waypoints")]
    EmptyMission,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AutopilotId {
    Takeoff,
    Mission,
    /// Return leg to the approach point; flown by the mission autopilot's
    /// planner but woken separately by the master.
    ReturnHome,
    Landing,
    EmergencyLanding,
}

/// What the motors should do this tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotorMode {
    Off,
    /// Spin at the idle command for the motor check.
    Idle,
    /// Track the reference with the flight controller.
    Flight(FlatSample),
}

/// Estimated navigation quantities the autopilots act on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub time: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub yaw: f64,
}

/// Output of one autopilot step.
#[derive(Debug, Clone, PartialEq)]
pub struct AutopilotOutput {
    pub motors: MotorMode,
    pub events: Vec<AutonomyEvent>,
}

impl AutopilotOutput {
    pub fn new(motors: MotorMode) -> Self {
        Self { motors, events: Vec::new() }
    }

    pub fn with_event(mut self, kind: EventKind, time: f64) -> Self {
        self.events.push(AutonomyEvent::new(kind, time));
        self
    }
}
