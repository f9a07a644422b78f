use super::ControlError;
use crate::geometry::{Vec3, GRAVITY};
use crate::trajectory::FlatSample;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslationGains {
    pub kp: [f64; 3],
    pub ki: [f64; 3],
    pub kd: [f64; 3],
    /// Bound on each axis of the integral contribution, m/s².
    pub integrator_limit: f64,
    /// Reference pre-filter time constant, s. Zero disables the filter.
    pub prefilter_tau: f64,
    /// Largest tilt of the commanded thrust vector, rad.
    pub max_tilt: f64,
}

impl Default for TranslationGains {
    fn default() -> Self {
        Self {
            kp: [3.0, 3.0, 3.0],
            ki: [0.1, 0.1, 0.3],
            kd: [3.2, 3.2, 3.0],
            integrator_limit: 2.0,
            prefilter_tau: 0.3,
            max_tilt: 35f64.to_radians(),
        }
    }
}

impl TranslationGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        let ok = |v: &[f64; 3]| v.iter().all(|g| *g >= 0.0 && g.is_finite());
        if !ok(&self.kp) {
            return Err(ControlError::InvalidGain("translation.kp"));
        }
        if !ok(&self.ki) {
            return Err(ControlError::InvalidGain("translation.ki"));
        }
        if !ok(&self.kd) {
            return Err(ControlError::InvalidGain("translation.kd"));
        }
        if !(self.integrator_limit > 0.0 && self.integrator_limit.is_finite()) {
            return Err(ControlError::InvalidGain("translation.integrator_limit"));
        }
        if !(self.prefilter_tau >= 0.0 && self.prefilter_tau.is_finite()) {
            return Err(ControlError::InvalidGain("translation.prefilter_tau"));
        }
        if !(self.max_tilt > 0.0 && self.max_tilt < std::f64::consts::FRAC_PI_2) {
            return Err(ControlError::InvalidGain("translation.max_tilt"));
        }
        Ok(())
    }
}

/// PID on position and velocity error against a first-order pre-filtered
/// reference. Position, velocity and feed-forward acceleration go through
/// the same filter so the filtered reference stays self-consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationController {
    pub gains: TranslationGains,
    filtered: Option<(Vec3, Vec3, Vec3)>,
    integral: Vec3,
}

impl TranslationController {
    pub fn new(gains: TranslationGains) -> Self {
        Self { gains, filtered: None, integral: Vec3::zeros() }
    }

    /// Clears the filter and integrator; the next reference is taken as is.
    pub fn reset(&mut self) {
        self.filtered = None;
        self.integral = Vec3::zeros();
    }

    /// Filtered position reference of the last step.
    pub fn filtered_position(&self) -> Option<Vec3> {
        self.filtered.map(|f| f.0)
    }

    pub fn integral(&self) -> Vec3 {
        self.integral
    }

    /// Commanded world acceleration including gravity compensation.
    pub fn step(&mut self, sample: &FlatSample, p_est: &Vec3, v_est: &Vec3, dt: f64) -> Vec3 {
        debug_assert!(dt > 0.0);
        let g = &self.gains;
        let (p_f, v_f, a_f) = match self.filtered {
            None => (sample.p_ref, sample.v_ref, sample.a_ff),
            Some((p, v, a)) => {
                let k = if g.prefilter_tau > 0.0 { 1.0 - (-dt / g.prefilter_tau).exp() } else { 1.0 };
                (p + (sample.p_ref - p) * k, v + (sample.v_ref - v) * k, a + (sample.a_ff - a) * k)
            }
        };
        self.filtered = Some((p_f, v_f, a_f));
        let ep = p_f - p_est;
        let ev = v_f - v_est;
        let kp = Vec3::from(g.kp);
        let ki = Vec3::from(g.ki);
        let kd = Vec3::from(g.kd);
        let lim = g.integrator_limit;
        self.integral = (self.integral + ki.component_mul(&ep) * dt).map(|c| c.clamp(-lim, lim));
        let mut a = a_f + kp.component_mul(&ep) + kd.component_mul(&ev) + self.integral + Vec3::new(0.0, 0.0, GRAVITY);
        limit_tilt(&mut a, g.max_tilt);
        a
    }
}

/// Keeps the thrust vector within `max_tilt` of vertical and pointing up,
/// preserving the vertical component where possible.
fn limit_tilt(a: &mut Vec3, max_tilt: f64) {
    a.z = a.z.max(0.2 * GRAVITY);
    let h = a.xy().norm();
    let h_max = a.z * max_tilt.tan();
    if h > h_max {
        let s = h_max / h;
        a.x *= s;
        a.y *= s;
    }
}
