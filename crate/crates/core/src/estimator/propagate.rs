use super::{ErrorCovariance, FilterConfig, FilterState, I_BA, I_BP, I_BW, I_MW, I_TH, I_V, N_DYN, N_ERR};
use crate::geometry::{compose_rotation_vector, exp_quat, gravity, rotmat, skew, Mat3};
use crate::sensors::ImuSample;
use nalgebra::SMatrix;

type M15 = SMatrix<f64, N_DYN, N_DYN>;

/// Strapdown propagation over `dt` holding the IMU sample constant.
///
/// Attitude is integrated exactly for the constant rate. Velocity and
/// position use Simpson's rule over the rotated specific force along that
/// attitude path. The covariance follows the discretized error dynamics
/// of the first 15 states; calibration states only pick up their random
/// walk.
pub fn propagate(
    fs: &FilterState,
    p: &ErrorCovariance,
    imu: &ImuSample,
    dt: f64,
    cfg: &FilterConfig,
) -> (FilterState, ErrorCovariance) {
    debug_assert!(dt > 0.0 && dt <= 0.01 + 1e-12, "dt {dt}");
    let w = imu.gyro - fs.b_w;
    let f = imu.accel - fs.b_a;
    let r0 = rotmat(&fs.q_wi);
    let q_mid = compose_rotation_vector(&fs.q_wi, &(w * (0.5 * dt)));
    let q1 = compose_rotation_vector(&fs.q_wi, &(w * dt));
    let a0 = r0 * f;
    let am = rotmat(&q_mid) * f;
    let a1 = rotmat(&q1) * f;
    let g = gravity();

    let mut next = fs.clone();
    next.q_wi = q1;
    next.v_wi = fs.v_wi + (a0 + 4.0 * am + a1) * (dt / 6.0) + g * dt;
    next.p_wi = fs.p_wi + fs.v_wi * dt + (a0 + 2.0 * am) * (dt * dt / 6.0) + g * (0.5 * dt * dt);

    // Continuous error dynamics A for [δp, δv, δθ, δb_ω, δb_a].
    let mut a = M15::zeros();
    a.fixed_view_mut::<3, 3>(0, I_V).copy_from(&Mat3::identity());
    let rm = rotmat(&q_mid);
    a.fixed_view_mut::<3, 3>(I_V, I_TH).copy_from(&(-rm * skew(&f)));
    a.fixed_view_mut::<3, 3>(I_V, I_BA).copy_from(&(-rm));
    a.fixed_view_mut::<3, 3>(I_TH, I_TH).copy_from(&(-skew(&w)));
    a.fixed_view_mut::<3, 3>(I_TH, I_BW).copy_from(&(-Mat3::identity()));
    let ad = a * dt;
    let mut phi = M15::identity() + ad + 0.5 * ad * ad;
    // Exact attitude transition for the constant rate.
    phi.fixed_view_mut::<3, 3>(I_TH, I_TH).copy_from(&rotmat(&exp_quat(&(w * dt))).transpose());

    let p11 = p.fixed_view::<N_DYN, N_DYN>(0, 0).into_owned();
    let p12 = p.fixed_view::<N_DYN, { N_ERR - N_DYN }>(0, N_DYN).into_owned();
    let mut p11n = phi * p11 * phi.transpose();
    let p12n = phi * p12;

    let qa = cfg.accel_noise_density.powi(2) * dt;
    let qg = cfg.gyro_noise_density.powi(2) * dt;
    let qbw = cfg.gyro_bias_walk.powi(2) * dt;
    let qba = cfg.accel_bias_walk.powi(2) * dt;
    for k in 0..3 {
        p11n[(I_V + k, I_V + k)] += qa;
        p11n[(I_TH + k, I_TH + k)] += qg;
        p11n[(I_BW + k, I_BW + k)] += qbw;
        p11n[(I_BA + k, I_BA + k)] += qba;
    }

    let mut pn = *p;
    pn.fixed_view_mut::<N_DYN, N_DYN>(0, 0).copy_from(&(0.5 * (p11n + p11n.transpose())));
    pn.fixed_view_mut::<N_DYN, { N_ERR - N_DYN }>(0, N_DYN).copy_from(&p12n);
    pn.fixed_view_mut::<{ N_ERR - N_DYN }, N_DYN>(N_DYN, 0).copy_from(&p12n.transpose());
    let qm = cfg.field_walk.powi(2) * dt;
    for k in 0..3 {
        pn[(I_MW + k, I_MW + k)] += qm;
    }
    pn[(I_BP, I_BP)] += cfg.baro_bias_walk.powi(2) * dt;
    (next, pn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{covariance_health, ErrorVector};
    use crate::geometry::{from_euler, UnitQuat, Vec3, GRAVITY};
    use nalgebra::Quaternion;

    fn start(q: UnitQuat) -> (FilterState, ErrorCovariance, FilterConfig) {
        let cfg = FilterConfig::default();
        let s = FilterState::from_priors(Vec3::new(1.0, 2.0, 3.0), Vec3::zeros(), q, &cfg);
        let p = cfg.initial_covariance();
        (s, p, cfg)
    }

    fn imu(accel: Vec3, gyro: Vec3) -> ImuSample {
        ImuSample { accel, gyro, time: 0.0 }
    }

    #[test]
    fn hover_inputs_hold_position() {
        let (mut s, mut p, cfg) = start(UnitQuat::identity());
        let p0 = s.p_wi;
        for _ in 0..200 {
            (s, p) = propagate(&s, &p, &imu(Vec3::new(0.0, 0.0, GRAVITY), Vec3::zeros()), 0.005, &cfg);
            assert!((s.p_wi - p0).norm() < 1e-9 && s.v_wi.norm() < 1e-9);
        }
    }

    #[test]
    fn free_fall_velocity() {
        let (mut s, mut p, cfg) = start(from_euler(0.3, -0.2, 1.0));
        for _ in 0..20 {
            (s, p) = propagate(&s, &p, &imu(Vec3::zeros(), Vec3::new(0.1, 0.2, 0.3)), 0.005, &cfg);
        }
        assert!((s.v_wi.z + 0.980665).abs() < 1e-12);
        assert!(s.v_wi.xy().norm() < 1e-12);
    }

    /// Reference: RK4 on p, v, q with a 10 µs step.
    fn rk4_reference(q0: UnitQuat, f: Vec3, w: Vec3, t: f64) -> (Vec3, Vec3) {
        let h = 1e-5;
        let n = (t / h).round() as usize;
        let deriv = |q: &Quaternion<f64>, v: &Vec3| {
            let qn = UnitQuat::new_normalize(*q);
            let a = rotmat(&qn) * f + gravity();
            let qd = q * Quaternion::new(0.0, w.x, w.y, w.z) * 0.5;
            (*v, a, qd)
        };
        let (mut p, mut v, mut q) = (Vec3::zeros(), Vec3::zeros(), q0.into_inner());
        for _ in 0..n {
            let (p1, v1, q1) = deriv(&q, &v);
            let (p2, v2, q2) = deriv(&(q + q1 * (0.5 * h)), &(v + v1 * (0.5 * h)));
            let (p3, v3, q3) = deriv(&(q + q2 * (0.5 * h)), &(v + v2 * (0.5 * h)));
            let (p4, v4, q4) = deriv(&(q + q3 * h), &(v + v3 * h));
            p += (p1 + 2.0 * p2 + 2.0 * p3 + p4) * (h / 6.0);
            v += (v1 + 2.0 * v2 + 2.0 * v3 + v4) * (h / 6.0);
            q += (q1 + q2 * 2.0 + q3 * 2.0 + q4) * (h / 6.0);
        }
        (p, v)
    }

    #[test]
    fn banked_turn_matches_fine_reference() {
        let q0 = from_euler(30f64.to_radians(), 0.0, 0.0);
        let f = Vec3::new(0.5, 0.0, GRAVITY / 30f64.to_radians().cos());
        let w = Vec3::new(0.0, 0.2, 0.5);
        let (mut s, mut p, cfg) = start(q0);
        s.p_wi = Vec3::zeros();
        for _ in 0..200 {
            (s, p) = propagate(&s, &p, &imu(f, w), 0.005, &cfg);
        }
        let (pr, vr) = rk4_reference(q0, f, w, 1.0);
        assert!((s.p_wi - pr).norm() < 1e-4, "{}", (s.p_wi - pr).norm());
        assert!((s.v_wi - vr).norm() < 1e-4);
    }

    #[test]
    fn covariance_stays_psd_and_calibration_block_static() {
        let (mut s, mut p, mut cfg) = start(from_euler(0.1, 0.2, 0.3));
        cfg.baro_bias_walk = 0.0;
        cfg.field_walk = 0.0;
        let p22 = p.fixed_view::<13, 13>(15, 15).into_owned();
        for k in 0..400 {
            let t = k as f64 * 0.005;
            (s, p) = propagate(&s, &p, &imu(Vec3::new(t.sin(), 0.3, 9.0), Vec3::new(0.5, -0.2, t.cos())), 0.005, &cfg);
            let (e, a) = covariance_health(&p);
            assert!(e >= -1e-9 && a < 1e-9);
        }
        assert_eq!(p.fixed_view::<13, 13>(15, 15).into_owned(), p22);
    }

    #[test]
    fn transition_matches_finite_difference_of_nominal_propagation() {
        // Propagating a perturbed state equals propagating the error with Φ
        // to first order.
        let (s, p0, cfg) = start(from_euler(0.2, -0.1, 0.7));
        let u = imu(Vec3::new(0.4, -0.3, 9.5), Vec3::new(0.3, -0.4, 0.8));
        let dt = 0.005;
        let (base, _) = propagate(&s, &p0, &u, dt, &cfg);
        // Φ recovered by propagating P = e_i e_iᵀ.
        for i in 0..15 {
            let mut dx = ErrorVector::zeros();
            dx[i] = 1e-6;
            let (pert, _) = propagate(&s.boxplus(&dx), &p0, &u, dt, &cfg);
            let mut pi = ErrorCovariance::zeros();
            pi[(i, i)] = 1.0;
            let cfg0 = FilterConfig { accel_noise_density: 0.0, gyro_noise_density: 0.0, accel_bias_walk: 0.0, gyro_bias_walk: 0.0, ..cfg.clone() };
            let (_, pp) = propagate(&s, &pi, &u, dt, &cfg0);
            let col_sq = pp.diagonal();
            let diff = |a: Vec3, b: Vec3| (a - b) / 1e-6;
            let dp = diff(pert.p_wi, base.p_wi);
            let dv = diff(pert.v_wi, base.v_wi);
            let dth = crate::geometry::log_quat(&(base.q_wi.inverse() * pert.q_wi)) / 1e-6;
            for k in 0..3 {
                assert!((dp[k].powi(2) - col_sq[k]).abs() < 1e-5, "p i={i} k={k}");
                assert!((dv[k].powi(2) - col_sq[3 + k]).abs() < 1e-5, "v i={i} k={k}");
                assert!((dth[k].powi(2) - col_sq[6 + k]).abs() < 1e-5, "th i={i} k={k}");
            }
        }
    }
}
