use super::{
    ErrorCovariance, EstimatorError, FilterState, I_BP, I_BW, I_MW, I_P, I_PIG, I_PIP, I_TH, I_TIM, I_V, N_ERR,
};
use crate::geometry::{rotmat, skew, Mat3, Vec3};
use crate::sensors::{BaroSample, GpsSample, MagSample, PositionSample};
use nalgebra::{DMatrix, DVector, SMatrix};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    GpsPos,
    GpsVel2d,
    PressureHeight,
    Mag3d,
    DirectPos,
}

impl MeasurementKind {
    pub const ALL: [MeasurementKind; 5] =
        [Self::GpsPos, Self::GpsVel2d, Self::PressureHeight, Self::Mag3d, Self::DirectPos];

    pub fn dim(self) -> usize {
        match self {
            Self::GpsVel2d => 2,
            Self::PressureHeight => 1,
            _ => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::GpsPos => "gps_pos",
            Self::GpsVel2d => "gps_vel_2d",
            Self::PressureHeight => "pressure_height",
            Self::Mag3d => "mag_3d",
            Self::DirectPos => "direct_pos",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub kind: MeasurementKind,
    pub value: DVector<f64>,
    pub noise: DMatrix<f64>,
    pub time: f64,
    /// Raw gyro rate at the measurement time; needed by `GpsVel2d`.
    pub gyro: Option<Vec3>,
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|s| s * s)))
}

impl Measurement {
    pub fn gps_pos(s: &GpsSample, std: [f64; 3]) -> Self {
        Self { kind: MeasurementKind::GpsPos, value: DVector::from_column_slice(s.position.as_slice()), noise: diag(&std), time: s.time, gyro: None }
    }

    pub fn gps_vel(s: &GpsSample, std: f64, gyro: Vec3) -> Self {
        Self {
            kind: MeasurementKind::GpsVel2d,
            value: DVector::from_column_slice(s.velocity_2d.as_slice()),
            noise: diag(&[std, std]),
            time: s.time,
            gyro: Some(gyro),
        }
    }

    pub fn pressure(s: &BaroSample, std: f64) -> Self {
        Self { kind: MeasurementKind::PressureHeight, value: DVector::from_element(1, s.height), noise: diag(&[std]), time: s.time, gyro: None }
    }

    pub fn mag(s: &MagSample, std: f64) -> Self {
        Self { kind: MeasurementKind::Mag3d, value: DVector::from_column_slice(s.field.as_slice()), noise: diag(&[std; 3]), time: s.time, gyro: None }
    }

    pub fn direct(s: &PositionSample, std: f64) -> Self {
        Self { kind: MeasurementKind::DirectPos, value: DVector::from_column_slice(s.position.as_slice()), noise: diag(&[std; 3]), time: s.time, gyro: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub kind: MeasurementKind,
    pub time: f64,
    /// Normalized innovation squared `yᵀ S⁻¹ y`.
    pub nis: f64,
    pub dof: usize,
    pub accepted: bool,
}

fn put(h: &mut DMatrix<f64>, row: usize, col: usize, m: &Mat3, rows: usize) {
    for r in 0..rows {
        for c in 0..3 {
            h[(row + r, col + c)] = m[(r, c)];
        }
    }
}

/// Predicted measurement and its Jacobian with respect to the error state.
pub fn predict_measurement(
    fs: &FilterState,
    kind: MeasurementKind,
    gyro: Option<&Vec3>,
) -> Result<(DVector<f64>, DMatrix<f64>), EstimatorError> {
    let r = rotmat(&fs.q_wi);
    let m = kind.dim();
    let mut h = DMatrix::zeros(m, N_ERR);
    let z = match kind {
        MeasurementKind::GpsPos => {
            put(&mut h, 0, I_P, &Mat3::identity(), 3);
            put(&mut h, 0, I_TH, &(-r * skew(&fs.p_ig)), 3);
            put(&mut h, 0, I_PIG, &r, 3);
            fs.p_wi + r * fs.p_ig
        }
        MeasurementKind::GpsVel2d => {
            let w = gyro.ok_or(EstimatorError::MissingGyro(kind))? - fs.b_w;
            let lever = w.cross(&fs.p_ig);
            put(&mut h, 0, I_V, &Mat3::identity(), 2);
            put(&mut h, 0, I_TH, &(-r * skew(&lever)), 2);
            put(&mut h, 0, I_BW, &(r * skew(&fs.p_ig)), 2);
            put(&mut h, 0, I_PIG, &(r * skew(&w)), 2);
            fs.v_wi + r * lever
        }
        MeasurementKind::PressureHeight => {
            h[(0, I_P + 2)] = 1.0;
            let th = -r * skew(&fs.p_ip);
            let pip = r;
            for c in 0..3 {
                h[(0, I_TH + c)] = th[(2, c)];
                h[(0, I_PIP + c)] = pip[(2, c)];
            }
            h[(0, I_BP)] = 1.0;
            let v = (fs.p_wi + r * fs.p_ip).z + fs.b_p;
            return Ok((DVector::from_element(1, v), h));
        }
        MeasurementKind::Mag3d => {
            let rim_t = rotmat(&fs.q_im).transpose();
            let mb = r.transpose() * fs.m_w;
            let zm = rim_t * mb;
            put(&mut h, 0, I_TH, &(rim_t * skew(&mb)), 3);
            put(&mut h, 0, I_TIM, &skew(&zm), 3);
            put(&mut h, 0, I_MW, &(rim_t * r.transpose()), 3);
            zm
        }
        MeasurementKind::DirectPos => {
            put(&mut h, 0, I_P, &Mat3::identity(), 3);
            fs.p_wi
        }
    };
    Ok((DVector::from_column_slice(&z.as_slice()[..m]), h))
}

/// χ² gate for `dof` degrees of freedom at probability `p`.
pub fn gate_threshold(dof: usize, p: f64) -> f64 {
    ChiSquared::new(dof as f64).map(|c| c.inverse_cdf(p)).unwrap_or(f64::INFINITY)
}

/// EKF update. Rejected measurements leave state and covariance untouched.
/// The covariance update is the Joseph form.
pub fn update(
    fs: &FilterState,
    p: &ErrorCovariance,
    meas: &Measurement,
    gate: f64,
) -> Result<(FilterState, ErrorCovariance, UpdateStats), EstimatorError> {
    let (dx, pn, stats) = correction(fs, p, meas, gate)?;
    match dx {
        Some(dx) => Ok((fs.inject(&dx), pn, stats)),
        None => Ok((fs.clone(), *p, stats)),
    }
}

/// Error-state correction and posterior covariance, without applying it.
pub(crate) fn correction(
    fs: &FilterState,
    p: &ErrorCovariance,
    meas: &Measurement,
    gate: f64,
) -> Result<(Option<super::ErrorVector>, ErrorCovariance, UpdateStats), EstimatorError> {
    let m = meas.kind.dim();
    if meas.value.len() != m || meas.noise.shape() != (m, m) {
        return Err(EstimatorError::Dimension(meas.kind));
    }
    if meas.noise.clone().cholesky().is_none() {
        return Err(EstimatorError::InvalidNoise);
    }
    let (zhat, h) = predict_measurement(fs, meas.kind, meas.gyro.as_ref())?;
    let y = &meas.value - zhat;
    let pd = DMatrix::from_column_slice(N_ERR, N_ERR, p.as_slice());
    let ph_t = &pd * h.transpose();
    let s = &h * &ph_t + &meas.noise;
    let s = 0.5 * (&s + s.transpose());
    let chol = s.clone().cholesky().ok_or(EstimatorError::InvalidNoise)?;
    let s_inv_y = chol.solve(&y);
    let nis = y.dot(&s_inv_y);
    let stats = UpdateStats { kind: meas.kind, time: meas.time, nis, dof: m, accepted: nis.is_finite() && nis <= gate };
    if !stats.accepted {
        return Ok((None, *p, stats));
    }
    // K = P Hᵀ S⁻¹, solved as (S⁻¹ H P)ᵀ.
    let k = chol.solve(&ph_t.transpose()).transpose();
    let dx = &k * &y;
    // Joseph form: (I-KH) P (I-KH)ᵀ + K R Kᵀ, expanded to avoid forming I-KH.
    let a = &pd - &k * ph_t.transpose();
    let pn = &a - (&a * h.transpose()) * k.transpose() + &k * &meas.noise * k.transpose();
    let pn = 0.5 * (&pn + pn.transpose());
    let dx = super::ErrorVector::from_column_slice(dx.as_slice());
    let pn = SMatrix::<f64, N_ERR, N_ERR>::from_column_slice(pn.as_slice());
    Ok((Some(dx), pn, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{covariance_health, ErrorVector, FilterConfig};
    use crate::geometry::{from_euler, yaw_quat, UnitQuat};
    use nalgebra::Vector2;
    use proptest::prelude::*;

    fn state() -> FilterState {
        let cfg = FilterConfig::default();
        let mut s = FilterState::from_priors(Vec3::new(1.0, -2.0, 5.0), Vec3::new(0.3, -0.1, 0.2), from_euler(0.2, -0.3, 1.1), &cfg);
        s.b_w = Vec3::new(0.01, -0.02, 0.005);
        s.b_a = Vec3::new(0.05, 0.02, -0.03);
        s.p_ig = Vec3::new(0.1, -0.05, 0.2);
        s.p_ip = Vec3::new(-0.02, 0.03, 0.04);
        s.q_im = from_euler(0.05, 0.1, -0.2);
        s.b_p = 0.4;
        s
    }

    #[test]
    fn substitution_examples() {
        let cfg = FilterConfig::default();
        let mut s = FilterState::from_priors(Vec3::new(1.0, 2.0, 3.0), Vec3::zeros(), UnitQuat::identity(), &cfg);
        s.p_ig = Vec3::new(0.1, 0.0, 0.0);
        let (z, _) = predict_measurement(&s, MeasurementKind::GpsPos, None).unwrap();
        assert!((z - DVector::from_column_slice(&[1.1, 2.0, 3.0])).amax() < 1e-12);

        s.p_wi = Vec3::new(0.0, 0.0, 10.0);
        s.p_ip = Vec3::new(0.0, 0.0, -0.05);
        s.b_p = 0.2;
        let (z, _) = predict_measurement(&s, MeasurementKind::PressureHeight, None).unwrap();
        assert!((z[0] - 10.15).abs() < 1e-12);

        s.q_wi = yaw_quat(std::f64::consts::FRAC_PI_2);
        s.q_im = UnitQuat::identity();
        s.m_w = Vec3::new(1.0, 0.0, 0.0);
        let (z, _) = predict_measurement(&s, MeasurementKind::Mag3d, None).unwrap();
        assert!((z - DVector::from_column_slice(&[0.0, -1.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn gps_velocity_needs_gyro() {
        assert_eq!(
            predict_measurement(&state(), MeasurementKind::GpsVel2d, None).map(|_| ()),
            Err(EstimatorError::MissingGyro(MeasurementKind::GpsVel2d))
        );
    }

    #[test]
    fn jacobians_match_central_differences() {
        let s = state();
        let gyro = Vec3::new(0.4, -0.7, 1.3);
        let h = 1e-6;
        for kind in MeasurementKind::ALL {
            let (_, jac) = predict_measurement(&s, kind, Some(&gyro)).unwrap();
            for i in 0..N_ERR {
                let mut dx = ErrorVector::zeros();
                dx[i] = h;
                let (zp, _) = predict_measurement(&s.boxplus(&dx), kind, Some(&gyro)).unwrap();
                dx[i] = -h;
                let (zm, _) = predict_measurement(&s.boxplus(&dx), kind, Some(&gyro)).unwrap();
                let fd = (zp - zm) / (2.0 * h);
                for r in 0..kind.dim() {
                    assert!((fd[r] - jac[(r, i)]).abs() < 1e-5, "{kind:?} row {r} col {i}: {} vs {}", fd[r], jac[(r, i)]);
                }
            }
        }
    }

    fn scalar_setup() -> (FilterState, ErrorCovariance) {
        let cfg = FilterConfig::default();
        let s = FilterState::from_priors(Vec3::zeros(), Vec3::zeros(), UnitQuat::identity(), &cfg);
        let mut p = ErrorCovariance::identity() * 1e-6;
        p[(I_P + 2, I_P + 2)] = 1.0;
        (s, p)
    }

    #[test]
    fn zero_innovation_shrinks_covariance() {
        let (s, p) = scalar_setup();
        let m = Measurement { kind: MeasurementKind::DirectPos, value: DVector::zeros(3), noise: DMatrix::identity(3, 3), time: 0.0, gyro: None };
        let (s2, p2, st) = update(&s, &p, &m, f64::INFINITY).unwrap();
        assert_eq!(s2, s);
        assert!(p2.trace() < p.trace());
        assert_eq!(st.nis, 0.0);
    }

    #[test]
    fn scalar_kalman_algebra() {
        let (s, p) = scalar_setup();
        let m = Measurement {
            kind: MeasurementKind::DirectPos,
            value: DVector::from_column_slice(&[0.0, 0.0, 1.0]),
            noise: DMatrix::identity(3, 3),
            time: 0.0,
            gyro: None,
        };
        let (s2, p2, st) = update(&s, &p, &m, f64::INFINITY).unwrap();
        assert!((s2.p_wi.z - 0.5).abs() < 1e-12);
        assert!((p2[(2, 2)] - 0.5).abs() < 1e-12);
        assert!((st.nis - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gate_rejects_outlier() {
        let (s, p) = scalar_setup();
        let m = Measurement {
            kind: MeasurementKind::DirectPos,
            value: DVector::from_column_slice(&[0.0, 0.0, 100.0]),
            noise: DMatrix::identity(3, 3),
            time: 0.0,
            gyro: None,
        };
        let (s2, p2, st) = update(&s, &p, &m, gate_threshold(3, 0.999)).unwrap();
        assert!(!st.accepted);
        assert_eq!((&s2, &p2), (&s, &p));
        let bad = Measurement { noise: -DMatrix::identity(3, 3), ..m };
        assert_eq!(update(&s, &p, &bad, 10.0).map(|_| ()), Err(EstimatorError::InvalidNoise));
    }

    #[test]
    fn gate_values() {
        assert!((gate_threshold(1, 0.999) - 10.828).abs() < 1e-3);
        assert!((gate_threshold(3, 0.999) - 16.266).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn update_keeps_covariance_psd(seed in 0u64..1000, kind_i in 0usize..5) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s = state();
            let l = SMatrix::<f64, N_ERR, N_ERR>::from_fn(|_, _| rng.gen_range(-0.1..0.1));
            let p = l * l.transpose() + ErrorCovariance::identity() * 1e-4;
            let kind = MeasurementKind::ALL[kind_i];
            let (z, _) = predict_measurement(&s, kind, Some(&Vec3::new(0.1, 0.2, 0.3))).unwrap();
            let noise = z.map(|_| rng.gen_range(-0.05..0.05));
            let r = DMatrix::identity(kind.dim(), kind.dim()) * 0.01;
            let m = Measurement { kind, value: z + noise, noise: r, time: 0.0, gyro: Some(Vec3::new(0.1, 0.2, 0.3)) };
            let (_, p2, _) = update(&s, &p, &m, f64::INFINITY).unwrap();
            let (e, a) = covariance_health(&p2);
            prop_assert!(e >= -1e-9 && a < 1e-9);
        }
    }

    #[test]
    fn velocity_measurement_constructor() {
        let g = GpsSample { position: Vec3::zeros(), velocity_2d: Vector2::new(1.0, 2.0), time: 3.0 };
        let m = Measurement::gps_vel(&g, 0.1, Vec3::zeros());
        assert_eq!(m.value.len(), 2);
        assert!((m.noise[(1, 1)] - 0.01).abs() < 1e-15);
    }
}
