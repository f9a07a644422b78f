use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatteryMode {
    Discharging,
    Charging,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    /// Terminal voltage, V.
    pub voltage: f64,
    /// State of charge in [0, 1].
    pub charge: f64,
    pub mode: BatteryMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatteryLoad {
    /// Electrical power drawn by the vehicle, W.
    Power(f64),
    /// Charging current delivered by the pad, A.
    ChargeCurrent(f64),
    None,
}

/// Battery model: piecewise-linear open-circuit voltage over charge plus an
/// ohmic term for load sag (discharge) or rise (charge).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryParams {
    pub v_full: f64,
    pub v_empty: f64,
    pub return_home_voltage: f64,
    pub critical_voltage: f64,
    /// (charge fraction, open-circuit voltage) breakpoints, increasing in both.
    pub curve: Vec<(f64, f64)>,
    /// Hover time from full charge until the loaded voltage reaches the
    /// return-home threshold, s.
    pub endurance_s: f64,
    /// Time to charge from empty to full, s.
    pub recharge_s: f64,
    /// Nominal electrical power at hover, W.
    pub hover_power_w: f64,
    pub internal_resistance: f64,
    pub charge_current_a: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            v_full: 12.6,
            v_empty: 9.9,
            return_home_voltage: 10.8,
            critical_voltage: 10.2,
            curve: vec![
                (0.0, 9.9),
                (0.1, 10.5),
                (0.2, 10.95),
                (0.5, 11.4),
                (0.8, 11.9),
                (1.0, 12.6),
            ],
            endurance_s: 16.0 * 60.0,
            recharge_s: 40.0 * 60.0,
            hover_power_w: 180.0,
            internal_resistance: 0.01,
            charge_current_a: 5.0,
        }
    }
}

impl BatteryParams {
    pub fn open_circuit_voltage(&self, charge: f64) -> f64 {
        let c = charge.clamp(0.0, 1.0);
        let pts = &self.curve;
        if c <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((c0, v0), (c1, v1)) = (w[0], w[1]);
            if c <= c1 {
                return v0 + (v1 - v0) * (c - c0) / (c1 - c0);
            }
        }
        pts[pts.len() - 1].1
    }

    fn inverse_ocv(&self, v: f64) -> f64 {
        let pts = &self.curve;
        if v <= pts[0].1 {
            return pts[0].0;
        }
        for w in pts.windows(2) {
            let ((c0, v0), (c1, v1)) = (w[0], w[1]);
            if v <= v1 {
                return c0 + (c1 - c0) * (v - v0) / (v1 - v0);
            }
        }
        pts[pts.len() - 1].0
    }

    /// Ohmic sag at a given power draw and open-circuit voltage.
    fn sag(&self, power: f64, ocv: f64) -> f64 {
        self.internal_resistance * power / ocv
    }

    /// Charge at which the loaded voltage at `power` equals `threshold`.
    pub fn charge_at_loaded_voltage(&self, threshold: f64, power: f64) -> f64 {
        // sag depends on the OCV itself; a few fixed-point passes converge.
        let mut ocv = threshold;
        for _ in 0..20 {
            ocv = threshold + self.sag(power, ocv);
        }
        self.inverse_ocv(ocv)
    }

    /// Usable energy so that hovering from full reaches the return-home
    /// threshold after exactly `endurance_s`.
    pub fn capacity_j(&self) -> f64 {
        let c_ret = self.charge_at_loaded_voltage(self.return_home_voltage, self.hover_power_w);
        self.hover_power_w * self.endurance_s / (1.0 - c_ret)
    }

    pub fn full(&self) -> BatteryState {
        BatteryState { voltage: self.v_full, charge: 1.0, mode: BatteryMode::Idle }
    }

    pub fn at_charge(&self, charge: f64) -> BatteryState {
        BatteryState {
            voltage: self.open_circuit_voltage(charge).clamp(self.v_empty, self.v_full),
            charge,
            mode: BatteryMode::Idle,
        }
    }
}

/// Integrates the battery over `dt` under `load`. Charge is pinned to [0, 1]
/// and the terminal voltage to [v_empty, v_full]. Under a power load the
/// charge integrates the actual draw while the ohmic sag is taken at the
/// nominal hover power.
pub fn battery_step(b: &BatteryState, load: BatteryLoad, params: &BatteryParams, dt: f64) -> BatteryState {
    debug_assert!(dt > 0.0);
    match load {
        BatteryLoad::None => BatteryState { mode: BatteryMode::Idle, ..*b },
        BatteryLoad::Power(p) => {
            let p = p.max(0.0);
            let charge = (b.charge - p * dt / params.capacity_j()).clamp(0.0, 1.0);
            let ocv = params.open_circuit_voltage(charge);
            // Sag at the nominal draw: the reported voltage tracks charge, not
            // momentary load spikes.
            let sag = if p > 0.0 { params.sag(params.hover_power_w, ocv) } else { 0.0 };
            BatteryState {
                voltage: (ocv - sag).clamp(params.v_empty, params.v_full),
                charge,
                mode: BatteryMode::Discharging,
            }
        }
        BatteryLoad::ChargeCurrent(i) => {
            let rate = (i / params.charge_current_a) / params.recharge_s;
            let charge = (b.charge + rate * dt).clamp(0.0, 1.0);
            let ocv = params.open_circuit_voltage(charge);
            BatteryState {
                voltage: (ocv + params.internal_resistance * i).clamp(params.v_empty, params.v_full),
                charge,
                mode: BatteryMode::Charging,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idle_is_unchanged() {
        let p = BatteryParams::default();
        let b = p.at_charge(0.6);
        let n = battery_step(&b, BatteryLoad::None, &p, 1234.0);
        assert_eq!((n.voltage, n.charge), (b.voltage, b.charge));
    }

    #[test]
    fn hover_endurance_reaches_return_threshold() {
        let p = BatteryParams::default();
        let mut b = p.full();
        let dt = 0.1;
        let mut t = 0.0;
        while b.voltage > p.return_home_voltage && t < 10.0 * p.endurance_s {
            b = battery_step(&b, BatteryLoad::Power(p.hover_power_w), &p, dt);
            t += dt;
        }
        assert!((t - p.endurance_s).abs() <= 0.05 * p.endurance_s, "t = {t}");
        // Closed form: charge falls linearly at P / E.
        let expected = 1.0 - p.hover_power_w * t / p.capacity_j();
        assert!((b.charge - expected).abs() < 1e-9);
    }

    #[test]
    fn charging_from_empty_is_monotone_to_full() {
        let p = BatteryParams::default();
        let mut b = p.at_charge(0.0);
        let mut last = b.voltage;
        let mut t = 0.0;
        while b.charge < 1.0 {
            b = battery_step(&b, BatteryLoad::ChargeCurrent(p.charge_current_a), &p, 1.0);
            assert!(b.voltage >= last);
            last = b.voltage;
            t += 1.0;
        }
        assert_eq!(b.voltage, p.v_full);
        assert!((t - p.recharge_s).abs() <= 1.0);
    }

    #[test]
    fn discharge_is_monotone_and_bounded() {
        let p = BatteryParams::default();
        let mut b = p.full();
        for _ in 0..2000 {
            let n = battery_step(&b, BatteryLoad::Power(400.0), &p, 1.0);
            assert!(n.charge <= b.charge);
            assert!(n.voltage >= p.v_empty && n.voltage <= p.v_full);
            b = n;
        }
        assert_eq!(b.charge, 0.0);
    }
}
