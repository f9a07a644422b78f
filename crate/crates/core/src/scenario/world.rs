//! One simulated world: plant, sensors, estimator, controller and autonomy
//! stepped by a fixed-order 1 kHz scheduler.
//!
//! Per tick `k` (t = k ms), in this order:
//! 1. IMU sample and filter propagation when `k % 5 == 0`;
//! 2. magnetometer correction on the 60 Hz ticks;
//! 3. position and pressure corrections when `k % 50 == 0`;
//! 4. on `k % 50 == 0`: camera frame (while landing), autonomy, master, guidance,
//!    battery and log row;
//! 5. attitude, body-rate and mixer, then one plant step with wind and pad contact.
//!
//! With the motors off, the rotors stopped and the vehicle on the ground the
//! world is dormant: only step 4 runs, without the camera.

use super::{ScenarioConfig, ScenarioError};
use super::log::{FsmRow, LogRow, NisRow, RunLog};
use crate::autonomy::*;
use crate::camera::CameraPose;
use crate::control::FlightController;
use crate::estimator::{init_filter, FilterState, InitWindow, Measurement, MsfFilter};
use crate::geometry::{apply_small_angle, yaw_of, Vec3};
use crate::plant::*;
use crate::sensors::*;
use crate::vision::{estimate_camera_pose, pad_pose_measurement, PadMeasurement};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use std::path::Path;

pub const PHYSICS_DT: f64 = 1.0 / PHYSICS_RATE_HZ as f64;
pub const IMU_PERIOD: u64 = 5;
pub const GUIDANCE_PERIOD: u64 = 50;
pub const GUIDANCE_DT: f64 = GUIDANCE_PERIOD as f64 * PHYSICS_DT;

/// Idle thrust per motor as a fraction of the hover thrust.
const IDLE_FRACTION: f64 = 0.1;
/// Motor-check tolerance on the relative rotor speed error.
const MOTOR_CHECK_TOLERANCE: f64 = 0.05;

/// 60 Hz on the 1 kHz clock: ticks where `k·60 / 1000` steps up.
fn mag_due(k: u64) -> bool {
    (k * 60) % 1000 < 60
}

struct Streams {
    wind: ChaCha8Rng,
    imu: ChaCha8Rng,
    gps: ChaCha8Rng,
    baro: ChaCha8Rng,
    mag: ChaCha8Rng,
    mocap: ChaCha8Rng,
    camera: ChaCha8Rng,
    init: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let s = |i: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(i);
            r
        };
        Self { wind: s(1), imu: s(2), gps: s(3), baro: s(4), mag: s(5), mocap: s(6), camera: s(7), init: s(8) }
    }
}

/// Recent sensor samples for the filter re-initialization at takeoff.
#[derive(Debug, Clone, Default)]
struct SensorRing {
    horizon: f64,
    imu: VecDeque<ImuSample>,
    gps: VecDeque<GpsSample>,
    direct: VecDeque<PositionSample>,
    baro: VecDeque<BaroSample>,
    mag: VecDeque<MagSample>,
}

fn trim<T>(q: &mut VecDeque<T>, oldest: f64, time: impl Fn(&T) -> f64) {
    while q.front().is_some_and(|s| time(s) < oldest) {
        q.pop_front();
    }
}

fn since<T: Clone>(q: &VecDeque<T>, t0: f64, time: impl Fn(&T) -> f64) -> Vec<T> {
    q.iter().filter(|s| time(s) >= t0 - 1e-9).cloned().collect()
}

impl SensorRing {
    fn trim(&mut self, now: f64) {
        let oldest = now - self.horizon;
        trim(&mut self.imu, oldest, |s| s.time);
        trim(&mut self.gps, oldest, |s| s.time);
        trim(&mut self.direct, oldest, |s| s.time);
        trim(&mut self.baro, oldest, |s| s.time);
        trim(&mut self.mag, oldest, |s| s.time);
    }

    fn clear(&mut self) {
        self.imu.clear();
        self.gps.clear();
        self.direct.clear();
        self.baro.clear();
        self.mag.clear();
    }
}

struct Services<'a> {
    filter: &'a mut MsfFilter,
    ring: &'a SensorRing,
    window: f64,
    time: f64,
    motor_ok: bool,
    store: Option<&'a Path>,
}

impl TakeoffServices for Services<'_> {
    fn motor_check(&mut self) -> bool {
        self.motor_ok
    }

    fn reinit_filter(&mut self) -> Result<(), String> {
        let t0 = self.time - self.window;
        let imu = since(&self.ring.imu, t0, |s| s.time);
        let gps = since(&self.ring.gps, t0, |s| s.time);
        let direct = since(&self.ring.direct, t0, |s| s.time);
        let baro = since(&self.ring.baro, t0, |s| s.time);
        let mag = since(&self.ring.mag, t0, |s| s.time);
        let w = InitWindow { imu: &imu, gps: &gps, direct: &direct, baro: &baro, mag: &mag };
        let (s, p) = init_filter(&w, &self.filter.config).map_err(|e| e.to_string())?;
        self.filter.reset(s, p, self.time);
        Ok(())
    }

    fn persist_home(&mut self, rec: &HomeRecord) -> Result<(), String> {
        match self.store {
            Some(p) => home_store_persist(p, rec).map_err(|e| e.to_string()),
            None => Ok(()),
        }
    }
}

/// First ground contact after flight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Touchdown {
    pub time: f64,
    pub position: Vec3,
    pub on_pad: bool,
    /// Offset from the pad center in pad axes, m.
    pub offset: (f64, f64),
}

pub struct World {
    cfg: ScenarioConfig,
    wind_model: WindModel,
    tick: u64,
    truth: TrueVehicleState,
    wind: WindState,
    battery: BatteryState,
    energy_j: f64,
    imu_bias: ImuBiases,
    baro_bias: f64,
    rng: Streams,
    filter: MsfFilter,
    gyro: Vec3,
    /// True velocity at the previous IMU sample.
    imu_velocity: Vec3,
    ring: SensorRing,
    controller: FlightController,
    motors: MotorMode,
    cmd: [f64; 4],
    ctx: AutonomyContext,
    takeoff: TakeoffAutopilot,
    mission: MissionAutopilot,
    return_home: ReturnHomeAutopilot,
    landing: LandingAutopilot,
    emergency: EmergencyLandingAutopilot,
    monitor: BatteryMonitor,
    script: EventScript,
    pending: Vec<AutonomyEvent>,
    row_events: Vec<EventKind>,
    last_cam: Option<CameraPose>,
    log: RunLog,
    touchdowns: Vec<Touchdown>,
    fault: Option<String>,
    was_dormant: bool,
    start_wake: Option<AutopilotId>,
    tracking: ErrorAccumulator,
    estimation: ErrorAccumulator,
}

/// Running mean of squared position errors.
#[derive(Debug, Clone, Copy, Default)]
struct ErrorAccumulator {
    sum_sq: f64,
    n: usize,
}

impl ErrorAccumulator {
    fn add(&mut self, e: &Vec3) {
        self.sum_sq += e.norm_squared();
        self.n += 1;
    }

    fn rms(&self) -> Option<f64> {
        (self.n > 0).then(|| (self.sum_sq / self.n as f64).sqrt())
    }
}

impl World {
    pub fn new(cfg: &ScenarioConfig, script: EventScript) -> Result<Self, ScenarioError> {
        cfg.validate()?;
        let seed = cfg.seed.ok_or(ScenarioError::MissingSeed)?;
        let mut rng = Streams::new(seed);
        let imu_bias = ImuBiases::draw(&cfg.noise.imu, &mut rng.imu);
        let baro_bias = cfg.noise.baro.initial_offset;
        let pad = &cfg.pad;

        let mut ctx = AutonomyContext::new(cfg.start.state);
        if let Some(path) = &cfg.home_store {
            match home_store_load(path) {
                Ok(rec) => ctx.home = Some(rec),
                Err(HomeStoreError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => {
                    log::warn!("home store unusable, takeoff refused: {e}");
                    ctx.home_store_ok = false;
                }
            }
        }

        let airborne = cfg.start.state.is_airborne();
        let (truth, state) = if airborne {
            let p = cfg.start.position.map(Vec3::from).unwrap_or(pad.center() + Vec3::new(0.0, 0.0, cfg.takeoff.safe_altitude));
            let truth = TrueVehicleState::hovering(p, cfg.start.yaw, &cfg.vehicle);
            // Filter already running: start from the truth plus an error drawn
            // from the initial covariance.
            let f = &cfg.filter;
            let r = &mut rng.init;
            let g = |r: &mut ChaCha8Rng, s: f64| s * crate::sensors::gauss(r);
            let dp = Vec3::new(g(r, f.init_position_std), g(r, f.init_position_std), g(r, f.init_position_std));
            let dv = Vec3::new(g(r, f.init_velocity_std), g(r, f.init_velocity_std), g(r, f.init_velocity_std));
            let dth = Vec3::new(g(r, f.init_tilt_std), g(r, f.init_tilt_std), g(r, f.init_yaw_std));
            let mut s = FilterState::from_priors(truth.position + dp, truth.velocity + dv, apply_small_angle(&truth.attitude, &dth), f);
            s.b_p = baro_bias + g(r, f.init_baro_bias_std);
            if ctx.home.is_none() {
                ctx.home = Some(HomeRecord { x: pad.center[0], y: pad.center[1], altitude: pad.center[2], time: 0.0 });
            }
            (truth, s)
        } else {
            let truth = TrueVehicleState::landed(pad.center(), cfg.start.yaw);
            let mut s = FilterState::from_priors(truth.position, Vec3::zeros(), truth.attitude, &cfg.filter);
            s.b_p = baro_bias;
            (truth, s)
        };
        let filter = MsfFilter::new(state, cfg.filter.initial_covariance(), 0.0, cfg.filter.clone());

        let mut battery = cfg.battery.at_charge(cfg.initial_charge);
        battery.mode = BatteryMode::Idle;
        let mut monitor_cfg = BatteryMonitorConfig::from_params(&cfg.battery);
        monitor_cfg.debounce = cfg.battery_debounce;

        let mut w = Self {
            wind_model: cfg.wind_model(),
            tick: 0,
            truth,
            wind: WindState::new(),
            battery,
            energy_j: 0.0,
            imu_bias,
            baro_bias,
            rng,
            filter,
            gyro: Vec3::zeros(),
            imu_velocity: Vec3::zeros(),
            ring: SensorRing { horizon: cfg.takeoff.init_window + 0.5, ..Default::default() },
            controller: FlightController::new(cfg.control.clone(), cfg.vehicle.clone()),
            motors: MotorMode::Off,
            cmd: [0.0; 4],
            ctx,
            takeoff: TakeoffAutopilot::new(cfg.takeoff.clone()),
            mission: MissionAutopilot::new(cfg.mission.clone()),
            return_home: ReturnHomeAutopilot::new(cfg.mission.limits, cfg.takeoff.safe_altitude),
            landing: LandingAutopilot::new(cfg.landing.clone()),
            emergency: EmergencyLandingAutopilot::new(cfg.emergency.clone()),
            monitor: BatteryMonitor::new(monitor_cfg),
            script,
            pending: Vec::new(),
            row_events: Vec::new(),
            last_cam: None,
            log: RunLog::default(),
            touchdowns: Vec::new(),
            fault: None,
            was_dormant: false,
            start_wake: None,
            tracking: ErrorAccumulator::default(),
            estimation: ErrorAccumulator::default(),
            cfg: cfg.clone(),
        };
        // Airborne starts wake their autopilot on the first guidance tick,
        // after the first corrections.
        w.start_wake = w.ctx.active_autopilot();
        Ok(w)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * PHYSICS_DT
    }

    pub fn state(&self) -> MasterState {
        self.ctx.state
    }

    pub fn context(&self) -> &AutonomyContext {
        &self.ctx
    }

    pub fn truth(&self) -> &TrueVehicleState {
        &self.truth
    }

    pub fn filter(&self) -> &MsfFilter {
        &self.filter
    }

    pub fn battery(&self) -> &BatteryState {
        &self.battery
    }

    pub fn motors(&self) -> &MotorMode {
        &self.motors
    }

    /// Flight reference currently tracked, if the motors are in flight mode.
    pub fn reference(&self) -> Option<&crate::trajectory::FlatSample> {
        match &self.motors {
            MotorMode::Flight(s) => Some(s),
            _ => None,
        }
    }

    pub fn landing(&self) -> &LandingAutopilot {
        &self.landing
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn into_log(self) -> RunLog {
        self.log
    }

    pub fn touchdowns(&self) -> &[Touchdown] {
        &self.touchdowns
    }

    /// RMS distance between the true position and the flight reference,
    /// over airborne guidance ticks.
    pub fn tracking_rms(&self) -> Option<f64> {
        self.tracking.rms()
    }

    /// RMS position estimation error over airborne guidance ticks.
    pub fn estimation_rms(&self) -> Option<f64> {
        self.estimation.rms()
    }

    /// Cause of a terminal fault, if one occurred.
    pub fn fault(&self) -> Option<&str> {
        self.fault.as_deref()
    }

    /// Current filter estimate as seen by the autopilots.
    pub fn nav(&self, time: f64) -> NavState {
        let s = self.filter.state();
        NavState { time, position: s.p_wi, velocity: s.v_wi, yaw: yaw_of(&s.q_wi) }
    }

    fn dormant(&self) -> bool {
        matches!(self.motors, MotorMode::Off)
            && self.truth.on_ground
            && self.truth.motor_speeds.iter().all(|w| w.abs() < 1.0)
    }

    fn idle_thrust(&self) -> f64 {
        IDLE_FRACTION * self.cfg.vehicle.hover_thrust_per_motor()
    }

    fn motor_check_ok(&self) -> bool {
        let expect = self.cfg.vehicle.motor_map().speed_for_thrust(self.idle_thrust());
        self.truth.motor_speeds.iter().all(|w| ((w - expect) / expect).abs() < MOTOR_CHECK_TOLERANCE)
    }

    fn wake(&mut self, id: AutopilotId, nav: &NavState) {
        let failed = match id {
            AutopilotId::Takeoff => {
                self.takeoff.wake(nav);
                false
            }
            AutopilotId::Mission => self.mission.wake(nav).map_err(|e| log::warn!("mission planning failed: {e}")).is_err(),
            AutopilotId::ReturnHome => match self.ctx.home {
                Some(h) => self.return_home.wake(nav, &h).map_err(|e| log::warn!("return planning failed: {e}")).is_err(),
                None => {
                    log::warn!("no home record to return to");
                    true
                }
            },
            AutopilotId::Landing => {
                self.last_cam = None;
                self.landing.wake(nav);
                false
            }
            AutopilotId::EmergencyLanding => {
                self.emergency.wake(nav);
                false
            }
        };
        if failed {
            self.pending.push(AutonomyEvent::new(EventKind::AutopilotFailed, nav.time));
        }
    }

    fn step_autopilot(&mut self, nav: &NavState, pad: Option<&PadMeasurement>) -> AutopilotOutput {
        match self.ctx.active_autopilot() {
            None => AutopilotOutput::new(MotorMode::Off),
            Some(AutopilotId::Takeoff) => {
                let motor_ok = self.motor_check_ok();
                let mut services = Services {
                    filter: &mut self.filter,
                    ring: &self.ring,
                    window: self.cfg.takeoff.init_window,
                    time: nav.time,
                    motor_ok,
                    store: self.cfg.home_store.as_deref(),
                };
                let out = self.takeoff.step(nav, &mut services);
                if let Some(h) = self.takeoff.home() {
                    self.ctx.home = Some(*h);
                }
                out
            }
            Some(AutopilotId::Mission) => self.mission.step(nav),
            Some(AutopilotId::ReturnHome) => self.return_home.step(nav),
            Some(AutopilotId::Landing) => self.landing.step(nav, pad),
            Some(AutopilotId::EmergencyLanding) => self.emergency.step(nav),
        }
    }

    fn camera_measurement(&mut self) -> Option<PadMeasurement> {
        let c = &self.cfg;
        let dets = sample_tag_detections(&self.truth, &c.camera, &c.bundle, &c.pad, &c.visibility, c.noise.pixel_sigma, &mut self.rng.camera);
        if dets.is_empty() {
            self.last_cam = None;
            return None;
        }
        let est = estimate_camera_pose(&dets, &c.bundle, &c.camera, self.last_cam.as_ref())
            .or_else(|_| estimate_camera_pose(&dets, &c.bundle, &c.camera, None));
        match est {
            Ok(est) => {
                self.last_cam = Some(est.pose());
                let s = self.filter.state();
                Some(pad_pose_measurement(&est, &s.p_wi, &s.q_wi, &c.camera))
            }
            Err(e) => {
                log::debug!("camera frame dropped: {e}");
                self.last_cam = None;
                None
            }
        }
    }

    fn correct(filter: &mut MsfFilter, log: &mut RunLog, m: Measurement) {
        match filter.correct(&m) {
            Ok(outcome) => {
                if let Some(s) = outcome.stats() {
                    log.nis.push(NisRow { time: s.time, kind: s.kind, nis: s.nis, dof: s.dof, accepted: s.accepted });
                }
            }
            Err(e) => log::warn!("{} correction failed: {e}", m.kind.name()),
        }
    }

    fn sense(&mut self, k: u64, t: f64) {
        let c = &self.cfg;
        if k % IMU_PERIOD == 0 {
            // Mean acceleration over the sample interval, as an integrating
            // accelerometer reports it; keeps contact impulses visible.
            let acc = (self.truth.velocity - self.imu_velocity) / (IMU_PERIOD as f64 * PHYSICS_DT);
            self.imu_velocity = self.truth.velocity;
            let imu = sample_imu(&self.truth, &acc, &mut self.imu_bias, &c.noise.imu, &mut self.rng.imu);
            self.gyro = imu.gyro;
            self.ring.imu.push_back(imu);
            self.filter.feed_imu(imu);
        }
        if mag_due(k) {
            let m = sample_mag(&self.truth, &c.noise.mag, &mut self.rng.mag);
            self.ring.mag.push_back(m);
            let std = self.filter.config.mag_std;
            Self::correct(&mut self.filter, &mut self.log, Measurement::mag(&m, std));
        }
        if k % GUIDANCE_PERIOD == 0 {
            match c.profile {
                SensorProfile::Outdoor => {
                    let g = sample_gps(&self.truth, &c.noise.gps, &mut self.rng.gps);
                    self.ring.gps.push_back(g);
                    let (ps, vs) = (self.filter.config.gps_position_std, self.filter.config.gps_velocity_std);
                    Self::correct(&mut self.filter, &mut self.log, Measurement::gps_pos(&g, ps));
                    Self::correct(&mut self.filter, &mut self.log, Measurement::gps_vel(&g, vs, self.gyro));
                }
                SensorProfile::Indoor => {
                    let d = sample_direct_position(&self.truth, c.noise.mocap_std, &mut self.rng.mocap);
                    self.ring.direct.push_back(d);
                    let std = self.filter.config.direct_position_std;
                    Self::correct(&mut self.filter, &mut self.log, Measurement::direct(&d, std));
                }
            }
            let b = sample_baro(&self.truth, &mut self.baro_bias, &c.noise.baro, &mut self.rng.baro);
            self.ring.baro.push_back(b);
            let std = self.filter.config.baro_std;
            Self::correct(&mut self.filter, &mut self.log, Measurement::pressure(&b, std));
            self.ring.trim(t);
        }
    }

    /// Electrical power from the rotor thrusts, scaled from the nominal
    /// hover power with the momentum-theory exponent 3/2.
    fn power(&self) -> f64 {
        let p = &self.cfg.vehicle;
        let fh = p.hover_thrust_per_motor();
        let f = motor_thrusts(&self.truth.motor_speeds, p);
        self.cfg.battery.hover_power_w / 4.0 * f.iter().map(|fi| (fi.max(0.0) / fh).powf(1.5)).sum::<f64>()
    }

    fn set_motors(&mut self, m: MotorMode) {
        if matches!(m, MotorMode::Flight(_)) && !matches!(self.motors, MotorMode::Flight(_)) {
            self.controller.reset();
        }
        self.motors = m;
    }

    fn guidance(&mut self, k: u64, t: f64, dormant: bool) {
        let nav = self.nav(t);
        if let Some(id) = self.start_wake.take() {
            self.wake(id, &nav);
        }
        let cam_due = k % self.cfg.camera_period_ticks() == 0;
        let pad = if !dormant && cam_due && self.ctx.state == MasterState::Landing { self.camera_measurement() } else { None };

        let mut events = std::mem::take(&mut self.pending);
        events.extend(self.script.due(t));
        events.extend(self.monitor.step(&self.battery, t));
        let out = self.step_autopilot(&nav, pad.as_ref());
        events.extend(out.events);
        let mut motors = out.motors;

        let (ctx, cmds, rows) = master_step(&self.ctx, &events);
        self.ctx = ctx;
        for (time, state, event, new_state) in rows {
            self.log.fsm.push(FsmRow { time, state, event, new_state });
            self.row_events.push(event);
        }
        if !cmds.is_empty() {
            for c in &cmds {
                if let Some(id) = c.wake {
                    self.wake(id, &nav);
                }
            }
            // The new autopilot drives the motors from this tick on.
            let out = self.step_autopilot(&nav, None);
            self.pending.extend(out.events);
            motors = out.motors;
            if self.ctx.state == MasterState::Fault {
                self.fault.get_or_insert_with(|| format!("entered FAULT at {t:.2} s"));
            }
        }
        self.set_motors(motors);
        if let MotorMode::Flight(s) = self.motors {
            self.controller.guidance_step(&s, &nav.position, &nav.velocity, GUIDANCE_DT);
            if !self.truth.on_ground {
                self.tracking.add(&(self.truth.position - s.p_ref));
                self.estimation.add(&(self.truth.position - nav.position));
            }
        }

        // Pad contacts carry charge as soon as the motors are cut.
        let parked = matches!(self.motors, MotorMode::Off) && self.truth.on_ground;
        let load = if parked && self.ctx.state == MasterState::Charging && self.cfg.pad.contains_xy(&self.truth.position) {
            BatteryLoad::ChargeCurrent(self.cfg.battery.charge_current_a)
        } else if dormant {
            BatteryLoad::None
        } else {
            BatteryLoad::Power(self.energy_j / GUIDANCE_DT)
        };
        self.battery = battery_step(&self.battery, load, &self.cfg.battery, GUIDANCE_DT);
        self.energy_j = 0.0;

        if k % self.cfg.log_period_ticks() == 0 {
            self.push_row(t);
        }
    }

    fn push_row(&mut self, t: f64) {
        let s = self.filter.state();
        let q = |q: &crate::geometry::UnitQuat| [q.w, q.i, q.j, q.k];
        let row = LogRow {
            time: t,
            true_position: self.truth.position.into(),
            true_velocity: self.truth.velocity.into(),
            true_attitude: q(&self.truth.attitude),
            est_position: s.p_wi.into(),
            est_velocity: s.v_wi.into(),
            est_attitude: q(&s.q_wi),
            state: self.ctx.state,
            voltage: self.battery.voltage,
            charge: self.battery.charge,
            motor_cmd: self.cmd,
            events: std::mem::take(&mut self.row_events),
        };
        self.log.rows.push(row);
    }

    fn actuate(&mut self, t: f64) -> Result<(), ScenarioError> {
        let p = &self.cfg.vehicle;
        self.cmd = match self.motors {
            MotorMode::Off => [0.0; 4],
            MotorMode::Idle => [self.idle_thrust(); 4],
            MotorMode::Flight(_) => {
                let s = self.filter.state();
                let omega = self.gyro - s.b_w;
                self.controller.inner_step(&s.q_wi, &omega).command.f_ref
            }
        };
        if let Some(m) = self.cfg.motor_fault {
            self.cmd[m] = 0.0;
        }
        self.wind.step(&self.wind_model, PHYSICS_DT, &mut self.rng.wind);
        let wind = self.wind.velocity(&self.wind_model);
        let was_airborne = !self.truth.on_ground;
        let next = step_dynamics(&self.truth, &self.cmd, &wind, p, PHYSICS_DT)
            .map_err(|e| ScenarioError::Fault(format!("plant at {t:.3} s: {e}")))?;
        let (next, contact) = pad_contact(&next, &self.cfg.pad);
        self.truth = next;
        self.truth.time = t + PHYSICS_DT;
        if was_airborne && contact != ContactKind::None {
            let pos = self.truth.position;
            self.touchdowns.push(Touchdown {
                time: t + PHYSICS_DT,
                position: pos,
                on_pad: contact == ContactKind::Pad,
                offset: self.cfg.pad.local_offset(&pos),
            });
        }
        self.energy_j += self.power() * PHYSICS_DT;
        Ok(())
    }

    /// Advances one physics tick.
    pub fn step(&mut self) -> Result<(), ScenarioError> {
        let k = self.tick;
        let t = self.time();
        let dormant = self.dormant();
        if dormant {
            self.ring.clear();
            self.imu_velocity = self.truth.velocity;
        } else {
            if self.was_dormant {
                // Powered back up: restart from the last estimate at rest.
                let mut s = self.filter.state().clone();
                s.v_wi = Vec3::zeros();
                self.filter.reset(s, self.cfg.filter.initial_covariance(), t);
            }
            self.sense(k, t);
        }
        self.was_dormant = dormant;
        if k % GUIDANCE_PERIOD == 0 {
            self.guidance(k, t, dormant);
        }
        if !dormant {
            self.actuate(t)?;
        }
        self.tick += 1;
        Ok(())
    }

    /// Steps until `t_end`, a FAULT, or `stop` returning true (checked on
    /// guidance ticks). A plant failure ends the run as a fault.
    pub fn run_until(&mut self, t_end: f64, mut stop: impl FnMut(&World) -> bool) {
        let end = (t_end / PHYSICS_DT).round() as u64;
        while self.tick < end {
            if let Err(e) = self.step() {
                self.fault = Some(e.to_string());
                break;
            }
            if self.ctx.state == MasterState::Fault {
                break;
            }
            if self.tick % GUIDANCE_PERIOD == 0 && stop(self) {
                break;
            }
        }
    }
}
