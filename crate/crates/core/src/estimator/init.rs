use super::{ErrorCovariance, EstimatorError, FilterConfig, FilterState};
use crate::geometry::{from_euler, rotmat, wrap_angle, Vec3, GRAVITY};
use crate::sensors::{BaroSample, GpsSample, ImuSample, MagSample, PositionSample};

/// Sensor history collected while the vehicle sits still before takeoff.
#[derive(Debug, Clone, Default)]
pub struct InitWindow<'a> {
    pub imu: &'a [ImuSample],
    /// Antenna positions; used when non-empty.
    pub gps: &'a [GpsSample],
    /// Direct positions of the IMU reference; used when there is no GPS.
    pub direct: &'a [PositionSample],
    pub baro: &'a [BaroSample],
    pub mag: &'a [MagSample],
}

fn mean<T>(xs: &[T], f: impl Fn(&T) -> Vec3) -> Vec3 {
    xs.iter().fold(Vec3::zeros(), |a, x| a + f(x)) / xs.len() as f64
}

/// Static initialization.
///
/// Roll and pitch come from the mean specific force, yaw from the
/// tilt-compensated mean field direction, position from the averaged
/// position fix. The accelerometer bias is the mean specific force minus the
/// gravity reaction in the initialized attitude, which leaves only its
/// component along gravity. The pressure bias aligns pressure height with the
/// position fix.
pub fn init_filter(w: &InitWindow, cfg: &FilterConfig) -> Result<(FilterState, ErrorCovariance), EstimatorError> {
    if w.imu.is_empty() {
        return Err(EstimatorError::MissingData("accelerometer"));
    }
    if w.mag.is_empty() {
        return Err(EstimatorError::MissingData("magnetometer"));
    }
    if w.baro.is_empty() {
        return Err(EstimatorError::MissingData("pressure"));
    }
    if w.gps.is_empty() && w.direct.is_empty() {
        return Err(EstimatorError::MissingData("position"));
    }
    let f = mean(w.imu, |s| s.accel);
    let var = w.imu.iter().map(|s| (s.accel - f).norm_squared()).sum::<f64>() / w.imu.len() as f64;
    if var > cfg.init_motion_threshold {
        return Err(EstimatorError::ExcessiveMotion(var));
    }
    let roll = f.y.atan2(f.z);
    let pitch = (-f.x).atan2((f.y * f.y + f.z * f.z).sqrt());
    let tilt = from_euler(roll, pitch, 0.0);

    let m_imu = rotmat(&cfg.imu_to_mag()) * mean(w.mag, |s| s.field);
    let m_level = rotmat(&tilt) * m_imu;
    let m_w = cfg.field_world();
    let yaw = wrap_angle(m_w.y.atan2(m_w.x) - m_level.y.atan2(m_level.x));
    let q = from_euler(roll, pitch, yaw);
    let r = rotmat(&q);

    let mut s = FilterState::from_priors(Vec3::zeros(), Vec3::zeros(), q, cfg);
    s.b_a = f - r.transpose() * Vec3::new(0.0, 0.0, GRAVITY);
    s.p_wi = if !w.gps.is_empty() {
        mean(w.gps, |g| g.position) - r * s.p_ig
    } else {
        mean(w.direct, |d| d.position)
    };
    let baro = w.baro.iter().map(|b| b.height).sum::<f64>() / w.baro.len() as f64;
    s.b_p = baro - (s.p_wi + r * s.p_ip).z;
    Ok((s, cfg.initial_covariance()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{yaw_of, yaw_quat, UnitQuat};
    use crate::plant::TrueVehicleState;
    use crate::sensors::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Data {
        imu: Vec<ImuSample>,
        gps: Vec<GpsSample>,
        baro: Vec<BaroSample>,
        mag: Vec<MagSample>,
    }

    fn collect(truth: &TrueVehicleState, imu_p: &ImuParams, bias: ImuBiases, noisy: bool, seed: u64) -> Data {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gps_p = if noisy { GpsParams::default() } else { GpsParams { position_std: [0.0; 3], velocity_std: 0.0, ..Default::default() } };
        let baro_p = if noisy { BaroParams { drift_walk: 0.0, ..Default::default() } } else { BaroParams { height_std: 0.0, drift_walk: 0.0, ..Default::default() } };
        let mag_p = if noisy { MagParams::default() } else { MagParams { direction_std: 0.0, ..Default::default() } };
        let mut b = bias;
        let mut baro_bias = 1.7;
        let imu = (0..2000).map(|_| sample_imu(truth, &Vec3::zeros(), &mut b, imu_p, &mut rng)).collect();
        let gps = (0..200).map(|_| sample_gps(truth, &gps_p, &mut rng)).collect();
        let baro = (0..200).map(|_| sample_baro(truth, &mut baro_bias, &baro_p, &mut rng)).collect();
        let mag = (0..600).map(|_| sample_mag(truth, &mag_p, &mut rng)).collect();
        Data { imu, gps, baro, mag }
    }

    fn run(d: &Data) -> Result<(FilterState, ErrorCovariance), EstimatorError> {
        init_filter(&InitWindow { imu: &d.imu, gps: &d.gps, direct: &[], baro: &d.baro, mag: &d.mag }, &FilterConfig::default())
    }

    #[test]
    fn level_noiseless() {
        let truth = TrueVehicleState::landed(Vec3::new(3.0, -1.0, 0.15), 0.0);
        let d = collect(&truth, &ImuParams::noiseless(), ImuBiases::zero(), false, 0);
        let (s, p) = run(&d).unwrap();
        assert!(s.q_wi.angle_to(&UnitQuat::identity()) < 1e-9);
        assert!(s.b_a.norm() < 1e-9 && s.b_w.norm() == 0.0);
        assert!((s.p_wi - truth.position).norm() < 1e-9);
        // Pressure bias is measured height minus predicted height.
        let h = (truth.position + Vec3::from(BaroParams::default().lever_arm)).z;
        assert!((s.b_p - (d.baro[0].height - h)).abs() < 1e-9);
        assert!((s.b_p - 1.7).abs() < 1e-9);
        assert_eq!(p, FilterConfig::default().initial_covariance());
    }

    #[test]
    fn yawed_ninety_degrees() {
        let truth = TrueVehicleState::landed(Vec3::zeros(), std::f64::consts::FRAC_PI_2);
        let d = collect(&truth, &ImuParams::noiseless(), ImuBiases::zero(), false, 0);
        let (s, _) = run(&d).unwrap();
        assert!((yaw_of(&s.q_wi) - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
    }

    #[test]
    fn tilted_and_yawed_with_mag_rotation() {
        let mut truth = TrueVehicleState::landed(Vec3::zeros(), 0.0);
        truth.attitude = from_euler(0.08, -0.05, 2.5);
        let d = collect(&truth, &ImuParams::noiseless(), ImuBiases::zero(), false, 0);
        let (s, _) = run(&d).unwrap();
        assert!(s.q_wi.angle_to(&truth.attitude) < 1e-9);
    }

    #[test]
    fn accel_bias_along_gravity_recovered() {
        // On a level vehicle a horizontal accelerometer bias is
        // indistinguishable from tilt; the vertical component is observable.
        let truth = TrueVehicleState::landed(Vec3::zeros(), 0.7);
        let params = ImuParams { accel_bias_walk: 0.0, gyro_bias_walk: 0.0, ..ImuParams::default() };
        let bias = ImuBiases { accel: Vec3::new(0.0, 0.0, 0.1), gyro: Vec3::zeros() };
        let d = collect(&truth, &params, bias, true, 4);
        let (s, _) = run(&d).unwrap();
        // Per-sample σ is 0.01/sqrt(0.005) ≈ 0.14; the mean of 2000 has σ ≈ 3.2e-3.
        assert!((s.b_a - Vec3::new(0.0, 0.0, 0.1)).norm() < 0.015, "{:?}", s.b_a);
        // A horizontal bias shows up as tilt, not as bias.
        let bias = ImuBiases { accel: Vec3::new(0.1, 0.0, 0.0), gyro: Vec3::zeros() };
        let d = collect(&truth, &ImuParams::noiseless(), bias, false, 0);
        let (s, _) = run(&d).unwrap();
        assert!(s.b_a.norm() < 1e-3);
        let f = Vec3::new(0.1, 0.0, GRAVITY);
        assert!((s.b_a - (f - rotmat(&s.q_wi).transpose() * Vec3::new(0.0, 0.0, GRAVITY))).norm() < 1e-12);
    }

    #[test]
    fn noisy_init_close_to_truth() {
        let truth = TrueVehicleState::landed(Vec3::new(1.0, 2.0, 0.15), -1.2);
        let d = collect(&truth, &ImuParams::default(), ImuBiases::zero(), true, 9);
        let (s, _) = run(&d).unwrap();
        assert!((yaw_of(&s.q_wi) - yaw_of(&yaw_quat(-1.2))).abs() < 0.01);
        assert!((s.p_wi - truth.position).norm() < 0.3);
    }

    #[test]
    fn motion_rejected() {
        let truth = TrueVehicleState::landed(Vec3::zeros(), 0.0);
        let mut d = collect(&truth, &ImuParams::noiseless(), ImuBiases::zero(), false, 0);
        for (k, s) in d.imu.iter_mut().enumerate() {
            s.accel.x += if k % 2 == 0 { 2.0 } else { -2.0 };
        }
        assert!(matches!(run(&d), Err(EstimatorError::ExcessiveMotion(_))));
        d.mag.clear();
        assert!(matches!(run(&d), Err(EstimatorError::MissingData(_))));
    }
}
