use super::FlatSample;
use crate::geometry::Vec3;

/// Vertical velocity profile: linear ramp to a plateau and, unless it is
/// open-ended, a linear ramp back to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalProfile {
    pub z0: f64,
    /// Signed plateau velocity.
    pub v_peak: f64,
    pub t_ramp: f64,
    /// Plateau length; infinite for an open-ended descent.
    pub t_plateau: f64,
}

impl VerticalProfile {
    pub fn duration(&self) -> f64 {
        2.0 * self.t_ramp + self.t_plateau
    }

    fn accel(&self, t: f64) -> f64 {
        if t < 0.0 || t >= self.duration() || self.t_ramp == 0.0 {
            0.0
        } else if t < self.t_ramp {
            self.v_peak / self.t_ramp
        } else if t < self.t_ramp + self.t_plateau {
            0.0
        } else {
            -self.v_peak / self.t_ramp
        }
    }

    pub fn velocity(&self, t: f64) -> f64 {
        let tr = self.t_ramp;
        if t <= 0.0 || t >= self.duration() {
            0.0
        } else if t < tr {
            self.v_peak * t / tr
        } else if t <= tr + self.t_plateau {
            self.v_peak
        } else {
            self.v_peak * (self.duration() - t) / tr
        }
    }

    pub fn position(&self, t: f64) -> f64 {
        let tr = self.t_ramp;
        let t = t.clamp(0.0, self.duration());
        let ramp = |t: f64| if tr > 0.0 { 0.5 * self.v_peak * t * t / tr } else { 0.0 };
        let dz = if t < tr {
            ramp(t)
        } else if t <= tr + self.t_plateau {
            ramp(tr) + self.v_peak * (t - tr)
        } else {
            let left = self.duration() - t;
            2.0 * ramp(tr) + self.v_peak * self.t_plateau - ramp(left)
        };
        self.z0 + dz
    }

    /// Flat reference above `xy` with heading `yaw`.
    pub fn sample(&self, t: f64, xy: [f64; 2], yaw: f64) -> FlatSample {
        FlatSample {
            p_ref: Vec3::new(xy[0], xy[1], self.position(t)),
            v_ref: Vec3::new(0.0, 0.0, self.velocity(t)),
            a_ff: Vec3::new(0.0, 0.0, self.accel(t)),
            psi_ref: yaw,
            omega_ff: Vec3::zeros(),
        }
    }
}

/// Rest-to-rest vertical move from `z0` to `z1` with speed `v` and ramps of
/// `t_ramp`. Short moves become triangular with a reduced peak.
pub fn plan_vertical_velocity_profile(z0: f64, z1: f64, v: f64, t_ramp: f64) -> VerticalProfile {
    let d = z1 - z0;
    let v = v.abs();
    let sign = d.signum();
    if d.abs() >= v * t_ramp {
        VerticalProfile { z0, v_peak: sign * v, t_ramp, t_plateau: d.abs() / v - t_ramp }
    } else {
        // Triangle with the same ramp slope.
        let tr = (d.abs() * t_ramp / v).sqrt();
        let vp = if tr > 0.0 { d.abs() / tr } else { 0.0 };
        VerticalProfile { z0, v_peak: sign * vp, t_ramp: tr, t_plateau: 0.0 }
    }
}

/// Open-ended descent at `v` from `z0`, ramping in over `t_ramp`.
pub fn plan_descent_profile(z0: f64, v: f64, t_ramp: f64) -> VerticalProfile {
    VerticalProfile { z0, v_peak: -v.abs(), t_ramp, t_plateau: f64::INFINITY }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn takeoff_trapezoid() {
        let p = plan_vertical_velocity_profile(0.0, 4.0, 1.0, 0.5);
        assert!((p.duration() - 4.5).abs() < 1e-12);
        assert_eq!(p.velocity(2.0), 1.0);
        assert!((p.position(p.duration()) - 4.0).abs() < 1e-12);
        // Ramp area is v·t_ramp/2.
        assert!((p.position(0.5) - 0.25).abs() < 1e-12);
        assert_eq!(p.velocity(10.0), 0.0);
    }

    #[test]
    fn short_move_is_triangular() {
        let p = plan_vertical_velocity_profile(2.0, 2.1, 1.0, 0.5);
        assert_eq!(p.t_plateau, 0.0);
        assert!(p.v_peak < 1.0);
        assert!((p.position(p.duration()) - 2.1).abs() < 1e-12);
    }

    #[test]
    fn descent_is_open_ended_and_negative() {
        let p = plan_descent_profile(4.0, 0.3, 1.0);
        assert!(p.velocity(0.5) < 0.0);
        assert_eq!(p.velocity(100.0), -0.3);
        assert!((p.position(1.0) - (4.0 - 0.15)).abs() < 1e-12);
        assert!((p.position(11.0) - (4.0 - 0.15 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn velocity_integrates_to_position() {
        let p = plan_vertical_velocity_profile(5.0, 1.0, 0.8, 0.7);
        let n = 200_000;
        let h = p.duration() / n as f64;
        let mut z = p.z0;
        for i in 0..n {
            z += p.velocity((i as f64 + 0.5) * h) * h;
        }
        assert!((z - 1.0).abs() < 1e-6);
    }
}
