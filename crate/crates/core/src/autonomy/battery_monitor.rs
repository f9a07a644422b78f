use super::{AutonomyEvent, EventKind};
use crate::plant::{BatteryMode, BatteryParams, BatteryState};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryMonitorConfig {
    pub return_home_voltage: f64,
    pub critical_voltage: f64,
    /// Charging completes when the terminal voltage reaches this value.
    pub full_voltage: f64,
    /// A threshold must hold this long before its event fires, s.
    pub debounce: f64,
}

impl Default for BatteryMonitorConfig {
    fn default() -> Self {
        Self::from_params(&BatteryParams::default())
    }
}

impl BatteryMonitorConfig {
    pub fn from_params(p: &BatteryParams) -> Self {
        Self { return_home_voltage: p.return_home_voltage, critical_voltage: p.critical_voltage, full_voltage: p.v_full, debounce: 1.0 }
    }
}

/// Turns the battery reading into BatteryLow / BatteryCritical /
/// BatteryFull events. Each fires once per crossing; the low and critical
/// latches clear when charging starts, the full latch when discharge starts.
#[derive(Debug, Clone, PartialEq)]
pub struct BatteryMonitor {
    pub config: BatteryMonitorConfig,
    low_since: Option<f64>,
    critical_since: Option<f64>,
    low_sent: bool,
    critical_sent: bool,
    full_sent: bool,
}

impl BatteryMonitor {
    pub fn new(config: BatteryMonitorConfig) -> Self {
        Self { config, low_since: None, critical_since: None, low_sent: false, critical_sent: false, full_sent: false }
    }

    pub fn step(&mut self, b: &BatteryState, time: f64) -> Vec<AutonomyEvent> {
        let c = &self.config;
        let mut out = Vec::new();
        match b.mode {
            BatteryMode::Charging => {
                self.low_sent = false;
                self.critical_sent = false;
                self.low_since = None;
                self.critical_since = None;
                if !self.full_sent && b.voltage >= c.full_voltage - 1e-9 {
                    self.full_sent = true;
                    out.push(AutonomyEvent::new(EventKind::BatteryFull, time));
                }
            }
            BatteryMode::Discharging => {
                self.full_sent = false;
                let debounce = c.debounce;
                let mut check = |v: f64, th: f64, since: &mut Option<f64>, sent: &mut bool, kind| {
                    if v < th {
                        let t0 = *since.get_or_insert(time);
                        if !*sent && time - t0 >= debounce - 1e-9 {
                            *sent = true;
                            out.push(AutonomyEvent::new(kind, time));
                        }
                    } else {
                        *since = None;
                    }
                };
                check(b.voltage, c.return_home_voltage, &mut self.low_since, &mut self.low_sent, EventKind::BatteryLow);
                check(b.voltage, c.critical_voltage, &mut self.critical_since, &mut self.critical_sent, EventKind::BatteryCritical);
            }
            BatteryMode::Idle => {}
        }
        out
    }
}
