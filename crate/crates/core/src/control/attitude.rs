use crate::geometry::{rotmat, Mat3, UnitQuat, Vec3};

/// Below this thrust-vector norm the direction is considered undefined.
const MIN_THRUST_ACCEL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeRefs {
    pub omega_ref: Vec3,
    /// Collective thrust, N.
    pub thrust: f64,
    /// Set when the attitude reference was held from the previous step.
    pub degenerate: bool,
}

/// Attitude with body z along `a_ref` and heading `psi`.
pub fn desired_attitude(a_ref: &Vec3, psi: f64) -> Option<UnitQuat> {
    let n = a_ref.norm();
    if !(n > MIN_THRUST_ACCEL) {
        return None;
    }
    let zb = a_ref / n;
    let xc = Vec3::new(psi.cos(), psi.sin(), 0.0);
    let mut yb = zb.cross(&xc);
    if yb.norm() < 1e-9 {
        // Thrust along the heading direction: any perpendicular will do.
        yb = zb.cross(&Vec3::new(-psi.sin(), psi.cos(), 0.0)).cross(&zb);
    }
    let yb = yb.normalize();
    let xb = yb.cross(&zb);
    Some(UnitQuat::from_matrix(&Mat3::from_columns(&[xb, yb, zb])))
}

/// Rate command from the error quaternion `q_e = q̂⁻¹ ⊗ q_des`, split into a
/// tilt part and a yaw part so tilt is corrected with its own, faster time
/// constant: `q_e = q_xy ⊗ q_z`.
fn error_rates(q_e: &UnitQuat, tau_tilt: f64, tau_yaw: f64) -> Vec3 {
    let (w, x, y, z) = (q_e.w, q_e.i, q_e.j, q_e.k);
    let a = (w * w + z * z).sqrt();
    let (bx, by, qz) = if a < 1e-12 { (x, y, 0.0) } else { ((w * x - y * z) / a, (w * y + x * z) / a, z / a) };
    let sgn = if w < 0.0 { -1.0 } else { 1.0 };
    Vec3::new(2.0 * bx / tau_tilt, 2.0 * by / tau_tilt, sgn * 2.0 * qz / tau_yaw)
}

/// Stateless attitude law. `None` when `a_ref` has no usable direction.
pub fn attitude_control(
    a_ref: &Vec3,
    psi_ref: f64,
    q_est: &UnitQuat,
    mass: f64,
    tau_tilt: f64,
    tau_yaw: f64,
) -> Option<AttitudeRefs> {
    let q_des = desired_attitude(a_ref, psi_ref)?;
    Some(refs_for(&q_des, a_ref, q_est, mass, tau_tilt, tau_yaw, false))
}

fn refs_for(q_des: &UnitQuat, a_ref: &Vec3, q_est: &UnitQuat, mass: f64, tau_tilt: f64, tau_yaw: f64, degenerate: bool) -> AttitudeRefs {
    let q_e = q_est.inverse() * q_des;
    let zb = rotmat(q_est).column(2).into_owned();
    AttitudeRefs {
        omega_ref: error_rates(&q_e, tau_tilt, tau_yaw),
        thrust: (mass * a_ref.dot(&zb)).max(0.0),
        degenerate,
    }
}

/// Attitude law that holds the last valid attitude reference through
/// degenerate thrust commands.
#[derive(Debug, Clone, PartialEq)]
pub struct AttitudeController {
    pub tau_tilt: f64,
    pub tau_yaw: f64,
    last: Option<UnitQuat>,
}

impl AttitudeController {
    pub fn new(tau_tilt: f64, tau_yaw: f64) -> Self {
        Self { tau_tilt, tau_yaw, last: None }
    }

    pub fn reset(&mut self) {
        self.last = None;
    }

    /// `omega_ff` is added to the feedback term.
    pub fn step(&mut self, a_ref: &Vec3, psi_ref: f64, omega_ff: &Vec3, q_est: &UnitQuat, mass: f64) -> AttitudeRefs {
        let (q_des, degenerate) = match desired_attitude(a_ref, psi_ref) {
            Some(q) => (q, false),
            None => (self.last.unwrap_or(*q_est), true),
        };
        self.last = Some(q_des);
        let mut r = refs_for(&q_des, a_ref, q_est, mass, self.tau_tilt, self.tau_yaw, degenerate);
        r.omega_ref += omega_ff;
        r
    }
}

/// Torques making the closed-loop rate dynamics `ω̇ = K_ω (ω_ref − ω)` on the
/// rigid body `J ω̇ = τ − ω × J ω`.
pub fn body_rate_control(omega_ref: &Vec3, omega: &Vec3, inertia: &Vec3, k_omega: &Vec3) -> Vec3 {
    let jw = inertia.component_mul(omega);
    inertia.component_mul(&k_omega.component_mul(&(omega_ref - omega))) + omega.cross(&jw)
}
