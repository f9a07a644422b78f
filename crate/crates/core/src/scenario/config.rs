use super::ScenarioError;
use crate::autonomy::{EmergencyConfig, LandingConfig, MasterState, MissionMode, MissionSpec, TakeoffConfig};
use crate::camera::CameraModel;
use crate::control::ControlGains;
use crate::estimator::FilterConfig;
use crate::geometry::Vec3;
use crate::plant::{BatteryParams, PadGeometry, VehicleParams, WindModel};
use crate::sensors::{BaroParams, GpsParams, ImuParams, MagParams, SensorProfile, TagVisibility};
use crate::trajectory::{TrajectoryLimits, Waypoint};
use crate::vision::TagBundleSpec;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Corner-pixel noise that makes the 48 cm tag's 2σ distance error 4.5 cm at
/// 4 m with the default camera; see `characterize_tag_error`.
pub const CALIBRATED_PIXEL_SIGMA: f64 = 0.1168;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub imu: ImuParams,
    pub gps: GpsParams,
    pub baro: BaroParams,
    pub mag: MagParams,
    /// Motion-capture position noise for the indoor profile, m.
    pub mocap_std: f64,
    /// Tag corner noise, px.
    pub pixel_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            imu: ImuParams::default(),
            gps: GpsParams::default(),
            baro: BaroParams::default(),
            mag: MagParams::default(),
            mocap_std: 0.001,
            pixel_sigma: CALIBRATED_PIXEL_SIGMA,
        }
    }
}

/// Where and in which master state a run begins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StartConfig {
    pub state: MasterState,
    /// Initial position for airborne starts; defaults to the approach point
    /// above the pad. Ground starts always begin on the pad.
    pub position: Option<[f64; 3]>,
    pub yaw: f64,
}

impl Default for StartConfig {
    fn default() -> Self {
        Self { state: MasterState::Charging, position: None, yaw: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Required for any run that writes results.
    pub seed: Option<u64>,
    /// Simulated duration, s.
    pub duration: f64,
    /// Simulated seconds per wall-clock second; unpaced when absent.
    pub time_acceleration: Option<f64>,
    pub profile: SensorProfile,
    pub vehicle: VehicleParams,
    pub noise: NoiseConfig,
    /// Defaults to calm indoors and light wind outdoors.
    pub wind: Option<WindModel>,
    pub battery: BatteryParams,
    pub initial_charge: f64,
    /// Debounce on the battery thresholds, s.
    pub battery_debounce: f64,
    pub camera: CameraModel,
    pub bundle: TagBundleSpec,
    pub visibility: TagVisibility,
    pub pad: PadGeometry,
    pub mission: MissionSpec,
    pub control: ControlGains,
    pub filter: FilterConfig,
    pub takeoff: TakeoffConfig,
    pub landing: LandingConfig,
    pub emergency: EmergencyConfig,
    pub start: StartConfig,
    pub home_store: Option<PathBuf>,
    /// Motor index that does not spin, for fault tests.
    pub motor_fault: Option<usize>,
    pub log_rate_hz: f64,
}

/// A short survey loop: about 150 s of flying between takeoff and return.
pub fn default_mission() -> MissionSpec {
    let wp = |x: f64, y: f64, z: f64, yaw: f64, hover: f64| Waypoint::new(Vec3::new(x, y, z), yaw, hover);
    MissionSpec {
        waypoints: vec![
            wp(10.0, 0.0, 6.0, 0.0, 30.0),
            wp(10.0, 10.0, 6.0, 1.5708, 30.0),
            wp(0.0, 10.0, 6.0, 3.1416, 30.0),
            wp(-10.0, 5.0, 5.0, 3.1416, 30.0),
        ],
        mode: MissionMode::Single,
        limits: TrajectoryLimits::default(),
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: None,
            duration: 600.0,
            time_acceleration: None,
            profile: SensorProfile::Outdoor,
            vehicle: VehicleParams::default(),
            noise: NoiseConfig::default(),
            wind: None,
            battery: BatteryParams::default(),
            initial_charge: 1.0,
            battery_debounce: 1.0,
            camera: CameraModel::default(),
            bundle: TagBundleSpec::default(),
            visibility: TagVisibility::default(),
            pad: PadGeometry::default(),
            mission: default_mission(),
            control: ControlGains::default(),
            filter: FilterConfig::default(),
            takeoff: TakeoffConfig::default(),
            landing: LandingConfig::default(),
            emergency: EmergencyConfig::default(),
            start: StartConfig::default(),
            home_store: None,
            motor_fault: None,
            log_rate_hz: 20.0,
        }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { path: path.to_string(), message: message.into() }
}

fn positive(path: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(path, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(path, format!("must be finite and >= 0, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Indoor profile: motion capture instead of GPS and calm air.
    pub fn indoor() -> Self {
        Self { profile: SensorProfile::Indoor, ..Self::default() }
    }

    pub fn outdoor() -> Self {
        Self::default()
    }

    pub fn wind_model(&self) -> WindModel {
        self.wind.clone().unwrap_or_else(|| match self.profile {
            SensorProfile::Indoor => WindModel::calm(),
            SensorProfile::Outdoor => WindModel::light(),
        })
    }

    /// Ticks of the 1 kHz clock between camera frames.
    pub fn camera_period_ticks(&self) -> u64 {
        (1000.0 / self.camera.rate_hz).round() as u64
    }

    pub fn log_period_ticks(&self) -> u64 {
        (1000.0 / self.log_rate_hz).round() as u64
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        positive("duration", self.duration)?;
        if let Some(a) = self.time_acceleration {
            positive("time_acceleration", a)?;
        }
        self.vehicle.validate().map_err(|e| invalid("vehicle", e.to_string()))?;
        non_negative("noise.mocap_std", self.noise.mocap_std)?;
        non_negative("noise.pixel_sigma", self.noise.pixel_sigma)?;
        if !self.wind_model().is_valid() {
            return Err(invalid("wind", "gust std must be >= 0 and correlation time > 0"));
        }
        let b = &self.battery;
        if !(b.v_empty < b.critical_voltage && b.critical_voltage < b.return_home_voltage && b.return_home_voltage < b.v_full) {
            return Err(invalid("battery", "need v_empty < critical_voltage < return_home_voltage < v_full"));
        }
        if b.curve.len() < 2 || b.curve.windows(2).any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1)) {
            return Err(invalid("battery.curve", "breakpoints must increase in charge and voltage"));
        }
        positive("battery.endurance_s", b.endurance_s)?;
        positive("battery.recharge_s", b.recharge_s)?;
        positive("battery.hover_power_w", b.hover_power_w)?;
        non_negative("battery.internal_resistance", b.internal_resistance)?;
        positive("battery.charge_current_a", b.charge_current_a)?;
        if !(0.0..=1.0).contains(&self.initial_charge) {
            return Err(invalid("initial_charge", "must lie in [0, 1]"));
        }
        non_negative("battery_debounce", self.battery_debounce)?;
        positive("camera.rate_hz", self.camera.rate_hz)?;
        // Frames are consumed by the 20 Hz guidance loop.
        let period = 1000.0 / self.camera.rate_hz;
        if (period - period.round()).abs() > 1e-9 || period.round() as u64 % 50 != 0 {
            return Err(invalid("camera.rate_hz", "must be 20 Hz divided by a whole number"));
        }
        if !self.camera.fov_consistent(0.5) {
            return Err(invalid("camera.fx", "focal length disagrees with hfov_deg"));
        }
        self.bundle.validate().map_err(|e| invalid("bundle", e.to_string()))?;
        positive("visibility.min_edge_px", self.visibility.min_edge_px)?;
        positive("visibility.max_edge_frac", self.visibility.max_edge_frac)?;
        positive("pad.size", self.pad.size)?;
        self.mission.validate().map_err(|e| invalid("mission.waypoints", e.to_string()))?;
        positive("mission.limits.v_max", self.mission.limits.v_max)?;
        positive("mission.limits.a_max", self.mission.limits.a_max)?;
        for (i, w) in self.mission.waypoints.iter().enumerate() {
            if !w.position.iter().all(|c| c.is_finite()) || !w.yaw.is_finite() || !(w.hover_time >= 0.0) {
                return Err(invalid(&format!("mission.waypoints[{i}]"), "position and yaw finite, hover_time >= 0"));
            }
        }
        self.control.validate().map_err(|e| invalid("control", e.to_string()))?;
        let f = &self.filter;
        positive("filter.gate_probability", f.gate_probability)?;
        if f.gate_probability >= 1.0 {
            return Err(invalid("filter.gate_probability", "must be < 1"));
        }
        positive("filter.buffer_horizon", f.buffer_horizon)?;
        positive("takeoff.safe_altitude", self.takeoff.safe_altitude)?;
        positive("takeoff.climb_speed", self.takeoff.climb_speed)?;
        positive("takeoff.init_window", self.takeoff.init_window)?;
        positive("landing.descent_speed", self.landing.descent_speed)?;
        positive("landing.detection_timeout", self.landing.detection_timeout)?;
        if !(self.landing.forgetting > 0.0 && self.landing.forgetting <= 1.0) {
            return Err(invalid("landing.forgetting", "must lie in (0, 1]"));
        }
        if self.landing.init_window < self.landing.k_min.max(1) {
            return Err(invalid("landing.init_window", "must be at least landing.k_min"));
        }
        positive("emergency.descent_speed", self.emergency.descent_speed)?;
        positive("log_rate_hz", self.log_rate_hz)?;
        let lp = 1000.0 / self.log_rate_hz;
        if (lp - lp.round()).abs() > 1e-9 || lp.round() < 1.0 {
            return Err(invalid("log_rate_hz", "must divide 1000 Hz into whole ticks"));
        }
        if let Some(m) = self.motor_fault {
            if m > 3 {
                return Err(invalid("motor_fault", "motor index must be 0..=3"));
            }
        }
        if let Some(p) = self.start.position {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(invalid("start.position", "must be finite"));
            }
        }
        if matches!(self.start.state, MasterState::EmergencyLanding) {
            return Err(invalid("start.state", "runs cannot start in EMERGENCY_LANDING"));
        }
        Ok(())
    }
}
