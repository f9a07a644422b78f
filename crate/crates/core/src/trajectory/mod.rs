//! Rest-to-rest polynomial mission trajectories, flat-output sampling and
//! vertical velocity profiles.

mod flat;
mod poly;
mod vertical;

pub use flat::{attitude_from_flat, body_rates_from_flat};
pub use poly::{
    plan_mission_trajectory, plan_segment, sample_trajectory, segment_duration, PolySegment, PolyTrajectory,
    SegmentKind, TrajectoryLimits, ACCEL_PEAK_FACTOR, SPEED_PEAK_FACTOR,
};
pub use vertical::{plan_descent_profile, plan_vertical_velocity_profile, VerticalProfile};

use crate::geometry::Vec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("need at least two waypoints")]
    TooFewWaypoints,
    #[error("waypoints {0} and {1} coincide")]
    CoincidentWaypoints(usize, usize),
    #[error("non-finite waypoint {0}")]
    NonFinite(usize),
    #[error("invalid limits: v_max and a_max must be positive")]
    InvalidLimits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaypointAction {
    AcquireData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub hover_time: f64,
    #[serde(default)]
    pub action: Option<WaypointAction>,
}

impl Waypoint {
    pub fn new(position: Vec3, yaw: f64, hover_time: f64) -> Self {
        Self { position: position.into(), yaw, hover_time, action: None }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::from(self.position)
    }
}

/// Flat-output reference for the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatSample {
    pub p_ref: Vec3,
    pub v_ref: Vec3,
    pub a_ff: Vec3,
    pub psi_ref: f64,
    pub omega_ff: Vec3,
}

impl FlatSample {
    /// Stationary reference at `p` with heading `yaw`.
    pub fn hold(p: Vec3, yaw: f64) -> Self {
        Self { p_ref: p, v_ref: Vec3::zeros(), a_ff: Vec3::zeros(), psi_ref: yaw, omega_ff: Vec3::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        [self.p_ref, self.v_ref, self.a_ff, self.omega_ff].iter().all(crate::geometry::is_finite) && self.psi_ref.is_finite()
    }
}
