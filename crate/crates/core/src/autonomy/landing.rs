use super::{AutopilotOutput, EventKind, MotorMode, NavState};
use crate::geometry::{wrap_angle, Vec3};
use crate::trajectory::{plan_descent_profile, plan_vertical_velocity_profile, FlatSample, VerticalProfile};
use crate::vision::{bundle_height, rls_initialize, rls_update, PadMeasurement, RlsPadEstimate, DEFAULT_FORGETTING, DEFAULT_K_MIN};
use log::{info, warn};
use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LandingConfig {
    /// Detection window before giving up on one attempt, s.
    pub detection_timeout: f64,
    pub max_retries: u32,
    /// Climb between detection attempts, m.
    pub retry_climb: f64,
    /// Measurements collected before the estimator is started.
    pub init_window: usize,
    pub k_min: usize,
    pub forgetting: f64,
    /// Per-axis measurement standard deviations [x, y, z, yaw].
    pub measurement_sigma: [f64; 4],
    pub align_position_tolerance: f64,
    pub align_yaw_tolerance: f64,
    pub align_speed_tolerance: f64,
    /// Descent starts after this long in alignment even if the thresholds
    /// were not met, s.
    pub align_timeout: f64,
    pub descent_speed: f64,
    pub descent_ramp: f64,
    pub touchdown_height: f64,
    pub touchdown_speed: f64,
    pub touchdown_hold: f64,
    /// Fallback touchdown: reference this far below the estimate with the
    /// vehicle at rest, held for `fallback_hold`.
    pub fallback_lag: f64,
    pub fallback_hold: f64,
    pub climb_speed: f64,
    pub climb_ramp: f64,
}

impl Default for LandingConfig {
    fn default() -> Self {
        Self {
            detection_timeout: 15.0,
            max_retries: 3,
            retry_climb: 1.0,
            init_window: 20,
            k_min: DEFAULT_K_MIN,
            forgetting: DEFAULT_FORGETTING,
            measurement_sigma: [0.03, 0.03, 0.08, 2f64.to_radians()],
            align_position_tolerance: 0.05,
            align_yaw_tolerance: 5f64.to_radians(),
            align_speed_tolerance: 0.1,
            align_timeout: 20.0,
            descent_speed: 0.3,
            descent_ramp: 1.0,
            touchdown_height: 0.08,
            touchdown_speed: 0.1,
            touchdown_hold: 0.3,
            fallback_lag: 0.25,
            fallback_hold: 1.0,
            climb_speed: 1.0,
            climb_ramp: 0.5,
        }
    }
}

impl LandingConfig {
    pub fn measurement_covariance(&self) -> Matrix4<f64> {
        Matrix4::from_diagonal(&self.measurement_sigma.map(|s| s * s).into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LandingPhase {
    HoverDetect { start: f64, attempt: u32, xy: [f64; 2], yaw: f64, climb: VerticalProfile },
    Align { start: f64, z: f64 },
    Descend { start: f64, profile: VerticalProfile },
    Landed,
    /// Detection gave up; the master switches to emergency landing.
    TimedOut { hold: FlatSample },
}

/// Pad detection at the approach point, alignment over the pad estimate, then
/// a constant-velocity descent until touchdown.
#[derive(Debug, Clone, PartialEq)]
pub struct LandingAutopilot {
    pub config: LandingConfig,
    phase: LandingPhase,
    window: Vec<PadMeasurement>,
    estimate: Option<RlsPadEstimate>,
    /// Time at which the touchdown (or fallback) condition began to hold.
    touch_since: Option<f64>,
    fallback_since: Option<f64>,
}

impl LandingAutopilot {
    pub fn new(config: LandingConfig) -> Self {
        Self { config, phase: LandingPhase::Landed, window: Vec::new(), estimate: None, touch_since: None, fallback_since: None }
    }

    pub fn phase(&self) -> &LandingPhase {
        &self.phase
    }

    pub fn estimate(&self) -> Option<&RlsPadEstimate> {
        self.estimate.as_ref()
    }

    /// Starts detection while holding the current position.
    pub fn wake(&mut self, nav: &NavState) {
        let z = nav.position.z;
        self.phase = LandingPhase::HoverDetect {
            start: nav.time,
            attempt: 0,
            xy: [nav.position.x, nav.position.y],
            yaw: nav.yaw,
            climb: plan_vertical_velocity_profile(z, z, 1.0, 0.0),
        };
        self.window.clear();
        self.estimate = None;
        self.touch_since = None;
        self.fallback_since = None;
    }

    fn pad_reference(&self, z: f64, v_z: f64) -> FlatSample {
        let est = self.estimate.as_ref().expect("pad estimate");
        let p = est.position();
        let mut s = FlatSample::hold(Vec3::new(p.x, p.y, z), est.yaw());
        s.v_ref.z = v_z;
        s
    }

    /// One step at the guidance rate. `measurement` is the pad pose derived
    /// from this tick's camera frame, if the tags were seen.
    pub fn step(&mut self, nav: &NavState, measurement: Option<&PadMeasurement>) -> AutopilotOutput {
        let c = self.config.clone();
        let t = nav.time;
        let r = c.measurement_covariance();
        match self.phase.clone() {
            LandingPhase::HoverDetect { start, attempt, xy, yaw, climb } => {
                let hold = climb.sample(t - start, xy, yaw);
                if let Some(z) = measurement {
                    self.window.push(*z);
                }
                if self.window.len() >= c.init_window {
                    match rls_initialize(&self.window, &r, c.forgetting, c.k_min) {
                        Ok(est) => {
                            info!("pad acquired at {:.1}: {:?}", t, est.position());
                            self.estimate = Some(est);
                            self.phase = LandingPhase::Align { start: t, z: hold.p_ref.z };
                            return AutopilotOutput::new(MotorMode::Flight(hold)).with_event(EventKind::PadAcquired, t);
                        }
                        Err(e) => warn!("pad initialization failed: {e}"),
                    }
                }
                if t - start < c.detection_timeout {
                    return AutopilotOutput::new(MotorMode::Flight(hold));
                }
                if attempt < c.max_retries {
                    warn!("no pad after {:.0} s, climbing {} m (retry {})", c.detection_timeout, c.retry_climb, attempt + 1);
                    let z0 = hold.p_ref.z;
                    self.window.clear();
                    self.phase = LandingPhase::HoverDetect {
                        start: t,
                        attempt: attempt + 1,
                        xy,
                        yaw,
                        climb: plan_vertical_velocity_profile(z0, z0 + c.retry_climb, c.climb_speed, c.climb_ramp),
                    };
                    return AutopilotOutput::new(MotorMode::Flight(hold));
                }
                self.phase = LandingPhase::TimedOut { hold };
                AutopilotOutput::new(MotorMode::Flight(hold)).with_event(EventKind::DetectionTimeout, t)
            }
            LandingPhase::Align { start, z } => {
                self.update(measurement, &r);
                let est = self.estimate.as_ref().expect("pad estimate");
                let dxy = (est.position() - nav.position).xy().norm();
                let dyaw = wrap_angle(est.yaw() - nav.yaw).abs();
                let aligned = dxy < c.align_position_tolerance
                    && dyaw < c.align_yaw_tolerance
                    && nav.velocity.norm() < c.align_speed_tolerance;
                if aligned || t - start >= c.align_timeout {
                    if !aligned {
                        warn!("alignment not reached after {:.0} s ({dxy:.3} m, {:.1} deg); descending", c.align_timeout, dyaw.to_degrees());
                    }
                    let profile = plan_descent_profile(z, c.descent_speed, c.descent_ramp);
                    self.phase = LandingPhase::Descend { start: t, profile };
                }
                AutopilotOutput::new(MotorMode::Flight(self.pad_reference(z, 0.0)))
            }
            LandingPhase::Descend { start, profile } => {
                // Missing frames leave the estimate as it is; the descent goes on.
                self.update(measurement, &r);
                let tau = t - start;
                let z_ref = profile.position(tau);
                let est = self.estimate.as_ref().expect("pad estimate");
                let still = nav.velocity.z.abs() < c.touchdown_speed;
                let near = bundle_height(nav.position.z, est) < c.touchdown_height;
                let sustained = |since: &mut Option<f64>, cond: bool, hold: f64| {
                    if cond {
                        let s0 = *since.get_or_insert(t);
                        t - s0 >= hold - 1e-9
                    } else {
                        *since = None;
                        false
                    }
                };
                let touch = sustained(&mut self.touch_since, near && still, c.touchdown_hold);
                let lag = sustained(&mut self.fallback_since, still && nav.position.z - z_ref > c.fallback_lag, c.fallback_hold);
                if touch || lag {
                    if !touch {
                        warn!("touchdown declared from stalled descent at height {:.2}", bundle_height(nav.position.z, est));
                    }
                    self.phase = LandingPhase::Landed;
                    return AutopilotOutput::new(MotorMode::Off).with_event(EventKind::Touchdown, t);
                }
                AutopilotOutput::new(MotorMode::Flight(self.pad_reference(z_ref, profile.velocity(tau))))
            }
            LandingPhase::Landed => AutopilotOutput::new(MotorMode::Off),
            LandingPhase::TimedOut { hold } => AutopilotOutput::new(MotorMode::Flight(hold)),
        }
    }

    fn update(&mut self, measurement: Option<&PadMeasurement>, r: &Matrix4<f64>) {
        if let (Some(z), Some(est)) = (measurement, &self.estimate) {
            self.estimate = Some(rls_update(est, z, r));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector4;

    const PAD: [f64; 4] = [0.2, -0.1, 0.15, 0.3];

    struct Sim {
        p: Vec3,
        v: Vec3,
        yaw: f64,
        t: f64,
    }

    impl Sim {
        fn nav(&self) -> NavState {
            NavState { time: self.t, position: self.p, velocity: self.v, yaw: self.yaw }
        }

        /// First-order tracking of the reference, stopping on the pad surface.
        fn advance(&mut self, m: &MotorMode) {
            let dt = 0.05;
            if let MotorMode::Flight(s) = m {
                let p_new = self.p + (s.p_ref - self.p) * (dt / 0.3);
                let mut p_new = p_new;
                p_new.z = p_new.z.max(PAD[2]);
                self.v = (p_new - self.p) / dt;
                self.p = p_new;
                self.yaw += wrap_angle(s.psi_ref - self.yaw) * (dt / 0.3);
            } else {
                self.v = Vec3::zeros();
            }
            self.t += dt;
        }
    }

    fn run(visible: impl Fn(&Sim) -> bool, secs: f64) -> (LandingAutopilot, Vec<(f64, EventKind)>, Sim) {
        let mut sim = Sim { p: Vec3::new(0.5, 0.3, 4.15), v: Vec3::zeros(), yaw: 0.0, t: 100.0 };
        let mut ap = LandingAutopilot::new(LandingConfig::default());
        ap.wake(&sim.nav());
        let mut events = Vec::new();
        let z = Vector4::from(PAD);
        for _ in 0..(secs * 20.0) as usize {
            let m = visible(&sim).then_some(&z);
            let out = ap.step(&sim.nav(), m);
            events.extend(out.events.iter().map(|e| (e.time - 100.0, e.kind)));
            sim.advance(&out.motors);
        }
        (ap, events, sim)
    }

    #[test]
    fn nominal_landing_touches_down_on_pad() {
        let (ap, ev, sim) = run(|_| true, 60.0);
        let kinds: Vec<_> = ev.iter().map(|e| e.1).collect();
        assert_eq!(kinds, [EventKind::PadAcquired, EventKind::Touchdown]);
        assert!((sim.p.x - PAD[0]).abs() < 0.01 && (sim.p.y - PAD[1]).abs() < 0.01);
        assert!((sim.yaw - PAD[3]).abs() < 5f64.to_radians());
        assert_eq!(*ap.phase(), LandingPhase::Landed);
        // 4 m at 0.3 m/s plus detection and alignment.
        assert!(ev[1].0 > 13.0 && ev[1].0 < 30.0, "{}", ev[1].0);
    }

    #[test]
    fn descent_tolerates_occlusion() {
        // Tags vanish below 2 m; the estimate held from above carries the descent.
        let (_, ev, sim) = run(|s| s.p.z > 2.0, 60.0);
        assert_eq!(ev.last().unwrap().1, EventKind::Touchdown);
        assert!((sim.p.x - PAD[0]).abs() < 0.01);
    }

    #[test]
    fn no_detection_retries_then_times_out() {
        let (ap, ev, sim) = run(|_| false, 80.0);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].1, EventKind::DetectionTimeout);
        // Four 15 s windows; the accumulated test clock lands within a tick.
        assert!((ev[0].0 - 60.0).abs() <= 0.1 + 1e-6, "{}", ev[0].0);
        assert!(matches!(ap.phase(), LandingPhase::TimedOut { .. }));
        // Three retries of +1 m each.
        assert!((sim.p.z - 7.15).abs() < 0.05, "{}", sim.p.z);
    }

    #[test]
    fn late_detection_after_retry() {
        let (_, ev, _) = run(|s| s.p.z > 4.8, 80.0);
        assert_eq!(ev.first().unwrap().1, EventKind::PadAcquired);
        assert!(ev[0].0 > 15.0);
        assert_eq!(ev.last().unwrap().1, EventKind::Touchdown);
    }

    #[test]
    fn no_touchdown_while_descending() {
        let (ap, ev, _) = run(|_| true, 12.0);
        assert!(!ev.iter().any(|e| e.1 == EventKind::Touchdown));
        assert!(matches!(ap.phase(), LandingPhase::Descend { .. }));
    }
}
