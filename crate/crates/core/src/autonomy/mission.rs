use super::{AutonomyError, AutopilotOutput, EventKind, HomeRecord, MotorMode, NavState};
use crate::geometry::Vec3;
use crate::trajectory::{
    plan_mission_trajectory, sample_trajectory, FlatSample, PolyTrajectory, TrajectoryError, TrajectoryLimits, Waypoint,
};
use log::info;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionMode {
    /// Fly the waypoints once, then return.
    Single,
    /// Restart after the last waypoint until the battery runs low.
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSpec {
    pub waypoints: Vec<Waypoint>,
    pub mode: MissionMode,
    #[serde(default)]
    pub limits: TrajectoryLimits,
}

impl MissionSpec {
    pub fn validate(&self) -> Result<(), AutonomyError> {
        if self.waypoints.is_empty() {
            return Err(AutonomyError::EmptyMission);
        }
        Ok(())
    }
}

/// Waypoints closer than this to their predecessor are merged.
const MERGE_DISTANCE: f64 = 0.05;

/// Trajectory from the current pose through `waypoints`.
fn plan_from(nav: &NavState, waypoints: &[Waypoint], limits: &TrajectoryLimits) -> Result<PolyTrajectory, TrajectoryError> {
    let mut wps = vec![Waypoint::new(nav.position, nav.yaw, 0.0)];
    for w in waypoints {
        let last = wps.last_mut().expect("nonempty");
        if (w.position() - last.position()).norm() < MERGE_DISTANCE {
            last.hover_time += w.hover_time;
            last.yaw = w.yaw;
            last.action = w.action.or(last.action);
        } else {
            wps.push(w.clone());
        }
    }
    if wps.len() == 1 {
        // Only a hover at the current position.
        let mut end = wps[0].clone();
        end.position[2] += MERGE_DISTANCE;
        wps.push(end);
    }
    plan_mission_trajectory(&wps, limits)
}

#[derive(Debug, Clone, PartialEq)]
struct Leg {
    traj: PolyTrajectory,
    start: f64,
}

impl Leg {
    fn sample(&self, t: f64) -> (FlatSample, bool) {
        let tau = t - self.start;
        let (s, _) = sample_trajectory(&self.traj, tau);
        (s, tau >= self.traj.duration())
    }
}

/// Samples the mission trajectory at the guidance rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionAutopilot {
    pub spec: MissionSpec,
    leg: Option<Leg>,
    completed: bool,
    /// Completed passes over the waypoint list.
    pub laps: u32,
}

impl MissionAutopilot {
    pub fn new(spec: MissionSpec) -> Self {
        Self { spec, leg: None, completed: false, laps: 0 }
    }

    pub fn wake(&mut self, nav: &NavState) -> Result<(), TrajectoryError> {
        self.completed = false;
        self.laps = 0;
        self.leg = Some(Leg { traj: plan_from(nav, &self.spec.waypoints, &self.spec.limits)?, start: nav.time });
        Ok(())
    }

    pub fn trajectory(&self) -> Option<&PolyTrajectory> {
        self.leg.as_ref().map(|l| &l.traj)
    }

    pub fn step(&mut self, nav: &NavState) -> AutopilotOutput {
        let Some(leg) = &self.leg else {
            return AutopilotOutput::new(MotorMode::Flight(FlatSample::hold(nav.position, nav.yaw)))
                .with_event(EventKind::AutopilotFailed, nav.time);
        };
        let (sample, finished) = leg.sample(nav.time);
        if !finished || self.completed {
            return AutopilotOutput::new(MotorMode::Flight(sample));
        }
        self.laps += 1;
        match self.spec.mode {
            MissionMode::Single => {
                self.completed = true;
                AutopilotOutput::new(MotorMode::Flight(sample)).with_event(EventKind::MissionComplete, nav.time)
            }
            MissionMode::Continuous => {
                info!("mission lap {} done at {:.1}", self.laps, nav.time);
                // Replan from the reference end point so the restart is smooth.
                let from = NavState { position: sample.p_ref, yaw: sample.psi_ref, ..*nav };
                match plan_from(&from, &self.spec.waypoints, &self.spec.limits) {
                    Ok(traj) => {
                        self.leg = Some(Leg { traj, start: nav.time });
                        AutopilotOutput::new(MotorMode::Flight(sample))
                    }
                    Err(_) => AutopilotOutput::new(MotorMode::Flight(sample)).with_event(EventKind::AutopilotFailed, nav.time),
                }
            }
        }
    }
}

/// Single planned segment to the approach point above home.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnHomeAutopilot {
    pub limits: TrajectoryLimits,
    /// Approach height above the home record, m.
    pub approach_height: f64,
    /// Arrival radius around the approach point, m.
    pub arrival_tolerance: f64,
    /// Arrival is declared this long after the segment ends even if the
    /// estimate is outside the radius, s.
    pub arrival_timeout: f64,
    leg: Option<Leg>,
    target: Vec3,
    arrived: bool,
}

impl ReturnHomeAutopilot {
    pub fn new(limits: TrajectoryLimits, approach_height: f64) -> Self {
        Self { limits, approach_height, arrival_tolerance: 0.3, arrival_timeout: 5.0, leg: None, target: Vec3::zeros(), arrived: false }
    }

    pub fn approach_point(home: &HomeRecord, height: f64) -> Vec3 {
        Vec3::new(home.x, home.y, home.altitude + height)
    }

    pub fn target(&self) -> Vec3 {
        self.target
    }

    pub fn wake(&mut self, nav: &NavState, home: &HomeRecord) -> Result<(), TrajectoryError> {
        self.target = Self::approach_point(home, self.approach_height);
        self.arrived = false;
        self.leg = if (self.target - nav.position).norm() < MERGE_DISTANCE {
            None
        } else {
            let wps = [Waypoint::new(nav.position, nav.yaw, 0.0), Waypoint::new(self.target, nav.yaw, 0.0)];
            Some(Leg { traj: plan_mission_trajectory(&wps, &self.limits)?, start: nav.time })
        };
        Ok(())
    }

    pub fn step(&mut self, nav: &NavState) -> AutopilotOutput {
        let (sample, finished, overdue) = match &self.leg {
            Some(leg) => {
                let (s, f) = leg.sample(nav.time);
                (s, f, nav.time - leg.start - leg.traj.duration() >= self.arrival_timeout)
            }
            None => (FlatSample::hold(self.target, nav.yaw), true, true),
        };
        let out = AutopilotOutput::new(MotorMode::Flight(sample));
        if !self.arrived && finished && ((nav.position - self.target).norm() < self.arrival_tolerance || overdue) {
            self.arrived = true;
            return out.with_event(EventKind::ArrivedHome, nav.time);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(mode: MissionMode) -> MissionSpec {
        MissionSpec {
            waypoints: vec![
                Waypoint::new(Vec3::new(5.0, 0.0, 5.0), 0.0, 1.0),
                Waypoint::new(Vec3::new(5.0, 5.0, 5.0), 1.0, 2.0),
                Waypoint::new(Vec3::new(0.0, 0.0, 4.0), 0.0, 0.0),
            ],
            mode,
            limits: TrajectoryLimits::default(),
        }
    }

    fn nav(t: f64, p: Vec3) -> NavState {
        NavState { time: t, position: p, velocity: Vec3::zeros(), yaw: 0.0 }
    }

    /// Follows the reference exactly; returns emitted events.
    fn fly(ap: &mut MissionAutopilot, secs: f64) -> Vec<(f64, EventKind)> {
        let mut p = Vec3::new(0.0, 0.0, 4.0);
        ap.wake(&nav(0.0, p)).unwrap();
        let mut ev = Vec::new();
        for k in 0..(secs * 20.0) as usize {
            let out = ap.step(&nav(k as f64 * 0.05, p));
            if let MotorMode::Flight(s) = out.motors {
                p = s.p_ref;
            }
            ev.extend(out.events.iter().map(|e| (e.time, e.kind)));
        }
        ev
    }

    #[test]
    fn single_mission_completes_after_final_hover() {
        let mut ap = MissionAutopilot::new(spec(MissionMode::Single));
        let ev = fly(&mut ap, 120.0);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].1, EventKind::MissionComplete);
        let d = ap.trajectory().unwrap().duration();
        assert!(ev[0].0 >= d && ev[0].0 < d + 0.05 + 1e-9);
    }

    #[test]
    fn continuous_mission_loops() {
        let mut ap = MissionAutopilot::new(spec(MissionMode::Continuous));
        let ev = fly(&mut ap, 200.0);
        assert!(ev.is_empty());
        assert!(ap.laps >= 2, "laps {}", ap.laps);
    }

    #[test]
    fn return_home_arrives() {
        let home = HomeRecord { x: 1.0, y: 1.0, altitude: 0.15, time: 0.0 };
        let mut rh = ReturnHomeAutopilot::new(TrajectoryLimits::default(), 4.0);
        let mut p = Vec3::new(8.0, -3.0, 6.0);
        rh.wake(&nav(10.0, p), &home).unwrap();
        let mut arrived = None;
        for k in 0..400 {
            let out = rh.step(&nav(10.0 + k as f64 * 0.05, p));
            if let MotorMode::Flight(s) = out.motors {
                p = s.p_ref;
            }
            if !out.events.is_empty() {
                arrived = Some(out.events[0]);
            }
        }
        let e = arrived.unwrap();
        assert_eq!(e.kind, EventKind::ArrivedHome);
        assert!((p - Vec3::new(1.0, 1.0, 4.15)).norm() < 1e-9);
    }

    #[test]
    fn return_home_switches_guidance_in_one_tick() {
        // Mid-segment abort: the first return sample starts at the current
        // position and heads for home.
        let home = HomeRecord { x: 0.0, y: 0.0, altitude: 0.0, time: 0.0 };
        let mut rh = ReturnHomeAutopilot::new(TrajectoryLimits::default(), 4.0);
        let here = Vec3::new(3.0, 3.0, 5.0);
        rh.wake(&nav(50.0, here), &home).unwrap();
        let MotorMode::Flight(s0) = rh.step(&nav(50.0, here)).motors else { panic!() };
        let MotorMode::Flight(s1) = rh.step(&nav(51.0, here)).motors else { panic!() };
        assert!((s0.p_ref - here).norm() < 1e-12);
        assert!((s1.p_ref - here).dot(&(rh.target() - here)) > 0.0);
    }

    #[test]
    fn hover_only_mission_plans() {
        let s = MissionSpec { waypoints: vec![Waypoint::new(Vec3::new(0.0, 0.0, 4.0), 0.0, 5.0)], mode: MissionMode::Single, limits: TrajectoryLimits::default() };
        let mut ap = MissionAutopilot::new(s);
        let ev = fly(&mut ap, 20.0);
        assert_eq!(ev.len(), 1);
        assert!(ev[0].0 >= 5.0);
    }
}
