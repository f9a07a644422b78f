use crate::geometry::Vec3;
use crate::plant::{allocation_matrix, VehicleParams};
use nalgebra::Vector4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SaturationFlags {
    pub yaw_reduced: bool,
    pub collective_shifted: bool,
    /// Roll/pitch torque alone did not fit and was scaled down.
    pub critical: bool,
}

impl SaturationFlags {
    pub fn any(&self) -> bool {
        self.yaw_reduced || self.collective_shifted || self.critical
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorCommand {
    /// Per-motor thrust, N, in plant motor order.
    pub f_ref: [f64; 4],
    pub flags: SaturationFlags,
}

impl MotorCommand {
    pub fn off() -> Self {
        Self { f_ref: [0.0; 4], flags: SaturationFlags::default() }
    }
}

fn spread(v: &Vector4<f64>) -> f64 {
    v.max() - v.min()
}

/// Largest s ∈ [0, 1] with `lo ≤ base + s·dir ≤ hi` elementwise, given that
/// `base` itself is feasible.
fn max_step(base: &Vector4<f64>, dir: &Vector4<f64>, lo: f64, hi: f64) -> f64 {
    let mut s: f64 = 1.0;
    for i in 0..4 {
        if dir[i] > 0.0 {
            s = s.min((hi - base[i]) / dir[i]);
        } else if dir[i] < 0.0 {
            s = s.min((lo - base[i]) / dir[i]);
        }
    }
    s.max(0.0)
}

/// Inverts the quad-X allocation and resolves saturation in priority order:
/// yaw torque is reduced first, then collective thrust is shifted, and only
/// if roll and pitch alone do not fit are they scaled down together.
pub fn mix_and_saturate(torques: &Vec3, thrust: f64, params: &VehicleParams) -> MotorCommand {
    let f_max = params.max_motor_thrust;
    let a_inv = allocation_matrix(params).try_inverse().expect("quad-X allocation is invertible");
    let unit = a_inv.column(0).into_owned();
    let rp = a_inv.column(1) * torques.x + a_inv.column(2) * torques.y;
    let yaw = a_inv.column(3) * torques.z;
    let mut flags = SaturationFlags::default();
    let inside = |f: &Vector4<f64>| f.iter().all(|&x| (0.0..=f_max).contains(&x));

    let full = unit * thrust + rp + yaw;
    let f = if inside(&full) {
        full
    } else if spread(&rp) > f_max {
        // Roll/pitch infeasible on their own: scale them to the motor range
        // and center them; yaw dropped.
        flags.critical = true;
        flags.yaw_reduced = torques.z != 0.0;
        flags.collective_shifted = true;
        let rp = rp * (f_max / spread(&rp));
        unit * (4.0 * (-rp.min())) + rp
    } else {
        let mut t = thrust;
        let mut base = unit * t + rp;
        if !inside(&base) {
            // Collective bounds that make roll/pitch fit: t/4 + rp ∈ [0, f_max].
            let lo = -rp.min() * 4.0;
            let hi = (f_max - rp.max()) * 4.0;
            t = t.clamp(lo, hi);
            base = unit * t + rp;
            flags.collective_shifted = true;
        }
        let s = max_step(&base, &yaw, 0.0, f_max);
        flags.yaw_reduced = s < 1.0;
        base + yaw * s
    };
    MotorCommand { f_ref: [0, 1, 2, 3].map(|i| f[i].clamp(0.0, f_max)), flags }
}
