//! Attitude and body rates implied by the flat outputs (acceleration, jerk,
//! heading and heading rate).

use crate::geometry::{Mat3, UnitQuat, Vec3, GRAVITY};

fn frame(acc: &Vec3, psi: f64) -> (Vec3, Vec3, Vec3, Vec3, f64) {
    let t = acc + Vec3::new(0.0, 0.0, GRAVITY);
    let tn = t.norm();
    let zb = t / tn;
    let xc = Vec3::new(psi.cos(), psi.sin(), 0.0);
    let u = zb.cross(&xc);
    let yb = u / u.norm();
    let xb = yb.cross(&zb);
    (xb, yb, zb, u, tn)
}

/// Body-to-world attitude whose thrust axis is along `acc - g` and whose
/// heading is `psi`.
pub fn attitude_from_flat(acc: &Vec3, psi: f64) -> UnitQuat {
    let (xb, yb, zb, _, _) = frame(acc, psi);
    UnitQuat::from_matrix(&Mat3::from_columns(&[xb, yb, zb]))
}

/// Body rates along the attitude of [`attitude_from_flat`] given the jerk and
/// heading rate.
pub fn body_rates_from_flat(acc: &Vec3, jerk: &Vec3, psi: f64, psi_dot: f64) -> Vec3 {
    let (xb, yb, zb, u, tn) = frame(acc, psi);
    let zb_dot = (jerk - zb * zb.dot(jerk)) / tn;
    let xc_dot = Vec3::new(-psi.sin(), psi.cos(), 0.0) * psi_dot;
    let xc = Vec3::new(psi.cos(), psi.sin(), 0.0);
    let u_dot = zb_dot.cross(&xc) + zb.cross(&xc_dot);
    let yb_dot = (u_dot - yb * yb.dot(&u_dot)) / u.norm();
    let xb_dot = yb_dot.cross(&zb) + yb.cross(&zb_dot);
    Vec3::new(yb_dot.dot(&zb), zb_dot.dot(&xb), xb_dot.dot(&yb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::log_quat;

    #[test]
    fn hover_is_level() {
        let q = attitude_from_flat(&Vec3::zeros(), 0.4);
        assert!(q.angle_to(&crate::geometry::yaw_quat(0.4)) < 1e-12);
        assert_eq!(body_rates_from_flat(&Vec3::zeros(), &Vec3::zeros(), 0.4, 0.0), Vec3::zeros());
    }

    #[test]
    fn pure_yaw_rate() {
        let w = body_rates_from_flat(&Vec3::zeros(), &Vec3::zeros(), 1.0, 0.3);
        assert!((w - Vec3::new(0.0, 0.0, 0.3)).norm() < 1e-12);
    }

    #[test]
    fn rates_match_finite_difference() {
        // a(t) = a0 + j t, ψ(t) = ψ0 + r t.
        let (a0, j, psi0, r) = (Vec3::new(1.0, -2.0, 0.5), Vec3::new(3.0, 1.0, -2.0), 0.7, 0.4);
        let h = 1e-5;
        let q = |t: f64| attitude_from_flat(&(a0 + j * t), psi0 + r * t);
        let fd = log_quat(&(q(-h).inverse() * q(h))) / (2.0 * h);
        let w = body_rates_from_flat(&a0, &j, psi0, r);
        assert!((w - fd).norm() < 1e-6, "{w} vs {fd}");
    }
}
