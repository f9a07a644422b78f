/// Normalized-command motor calibration: rotor speed is linear in the command,
/// so thrust is quadratic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorMap {
    max_thrust: f64,
    thrust_coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorOutput {
    pub thrust: f64,
    pub speed: f64,
    /// Set when the command was outside [0, 1] and had to be clamped.
    pub clamped: bool,
}

impl MotorMap {
    pub fn new(max_thrust: f64, thrust_coeff: f64) -> Self {
        Self { max_thrust, thrust_coeff }
    }

    pub fn max_speed(&self) -> f64 {
        (self.max_thrust / self.thrust_coeff).sqrt()
    }

    pub fn map(&self, cmd: f64) -> MotorOutput {
        let c = if cmd.is_nan() { 0.0 } else { cmd.clamp(0.0, 1.0) };
        MotorOutput {
            thrust: self.max_thrust * c * c,
            speed: self.max_speed() * c,
            clamped: c != cmd,
        }
    }

    /// Command that produces `thrust`, clamped to the achievable range.
    pub fn inverse(&self, thrust: f64) -> f64 {
        (thrust.max(0.0) / self.max_thrust).sqrt().min(1.0)
    }

    pub fn speed_for_thrust(&self, thrust: f64) -> f64 {
        (thrust.clamp(0.0, self.max_thrust) / self.thrust_coeff).sqrt()
    }
}
