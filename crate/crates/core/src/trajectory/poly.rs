use super::flat::body_rates_from_flat;
use super::{FlatSample, TrajectoryError, Waypoint, WaypointAction};
use crate::geometry::{wrap_angle, Vec3};
use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

/// Peak speed of the unit rest-to-rest degree-9 profile, in units of
/// distance / duration.
pub const SPEED_PEAK_FACTOR: f64 = 315.0 / 128.0;
/// Peak acceleration of the same profile, in units of distance / duration².
pub const ACCEL_PEAK_FACTOR: f64 = 9.371976218494101;

const DEG: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryLimits {
    pub v_max: f64,
    pub a_max: f64,
}

impl Default for TrajectoryLimits {
    fn default() -> Self {
        Self { v_max: 2.0, a_max: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentKind {
    Transit { from: usize, to: usize },
    Hover { waypoint: usize, action: Option<WaypointAction> },
}

/// One polynomial piece in normalized time `s = (t - t0) / duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySegment {
    pub kind: SegmentKind,
    pub duration: f64,
    /// Per-axis coefficients of `s^k`, k = 0..9.
    pub coeffs: [[f64; DEG]; 3],
    /// Yaw coefficients of `s^k`, k = 0..5.
    pub yaw: [f64; 6],
}

fn falling(k: usize, n: usize) -> f64 {
    (0..n).fold(1.0, |a, i| a * (k - i) as f64)
}

fn eval<const N: usize>(c: &[f64; N], s: f64, n: usize) -> f64 {
    let mut acc = 0.0;
    for k in (n..N).rev() {
        acc = acc * s + c[k] * falling(k, n);
    }
    acc
}

impl PolySegment {
    fn hover(p: Vec3, yaw: f64, duration: f64, waypoint: usize, action: Option<WaypointAction>) -> Self {
        let mut coeffs = [[0.0; DEG]; 3];
        for i in 0..3 {
            coeffs[i][0] = p[i];
        }
        let mut y = [0.0; 6];
        y[0] = yaw;
        Self { kind: SegmentKind::Hover { waypoint, action }, duration, coeffs, yaw: y }
    }

    /// n-th time derivative of position at local time `t`.
    pub fn derivative(&self, t: f64, n: usize) -> Vec3 {
        let s = t / self.duration;
        let scale = self.duration.powi(-(n as i32));
        Vec3::new(eval(&self.coeffs[0], s, n), eval(&self.coeffs[1], s, n), eval(&self.coeffs[2], s, n)) * scale
    }

    pub fn yaw_derivative(&self, t: f64, n: usize) -> f64 {
        eval(&self.yaw, t / self.duration, n) * self.duration.powi(-(n as i32))
    }
}

/// Rest-to-rest degree-9 coefficients for one axis on s ∈ [0, 1]: value
/// prescribed at both ends, derivatives 1 through 4 zero.
fn rest_to_rest(x0: f64, x1: f64) -> [f64; DEG] {
    let mut m = SMatrix::<f64, DEG, DEG>::zeros();
    let mut b = SVector::<f64, DEG>::zeros();
    for n in 0..5 {
        for k in n..DEG {
            m[(n, k)] = if k == n { falling(k, n) } else { 0.0 };
            m[(5 + n, k)] = falling(k, n);
        }
    }
    b[0] = x0;
    b[5] = x1;
    let c = m.lu().solve(&b).expect("boundary system is nonsingular");
    let mut out = [0.0; DEG];
    out.copy_from_slice(c.as_slice());
    out
}

/// Duration meeting the speed and acceleration limits for distance `d`.
pub fn segment_duration(d: f64, limits: &TrajectoryLimits) -> f64 {
    (d / limits.v_max * SPEED_PEAK_FACTOR).max((d * ACCEL_PEAK_FACTOR / limits.a_max).sqrt())
}

/// Single rest-to-rest segment between two poses.
pub fn plan_segment(
    from: (Vec3, f64),
    to: (Vec3, f64),
    limits: &TrajectoryLimits,
    kind: SegmentKind,
) -> Result<PolySegment, TrajectoryError> {
    let d = (to.0 - from.0).norm();
    if d < 1e-9 {
        return Err(TrajectoryError::CoincidentWaypoints(0, 1));
    }
    let duration = segment_duration(d, limits);
    let mut coeffs = [[0.0; DEG]; 3];
    for i in 0..3 {
        coeffs[i] = rest_to_rest(from.0[i], to.0[i]);
    }
    let dy = wrap_angle(to.1 - from.1);
    let yaw = [from.1, 0.0, 0.0, 10.0 * dy, -15.0 * dy, 6.0 * dy];
    Ok(PolySegment { kind, duration, coeffs, yaw })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyTrajectory {
    pub segments: Vec<PolySegment>,
    /// Start time of each segment, s.
    pub start_times: Vec<f64>,
}

impl PolyTrajectory {
    pub fn from_segments(segments: Vec<PolySegment>) -> Self {
        let mut t = 0.0;
        let start_times = segments
            .iter()
            .map(|s| {
                let t0 = t;
                t += s.duration;
                t0
            })
            .collect();
        Self { segments, start_times }
    }

    pub fn duration(&self) -> f64 {
        self.start_times.last().zip(self.segments.last()).map(|(t, s)| t + s.duration).unwrap_or(0.0)
    }

    /// Index of the segment active at `t` (the later one at a joint).
    pub fn segment_at(&self, t: f64) -> usize {
        self.start_times.partition_point(|&s| s <= t).saturating_sub(1).min(self.segments.len() - 1)
    }
}

/// One rest-to-rest segment per consecutive waypoint pair, with hover
/// segments for waypoints that have a hover time.
pub fn plan_mission_trajectory(waypoints: &[Waypoint], limits: &TrajectoryLimits) -> Result<PolyTrajectory, TrajectoryError> {
    if waypoints.len() < 2 {
        return Err(TrajectoryError::TooFewWaypoints);
    }
    if !(limits.v_max > 0.0 && limits.a_max > 0.0 && limits.v_max.is_finite() && limits.a_max.is_finite()) {
        return Err(TrajectoryError::InvalidLimits);
    }
    for (i, w) in waypoints.iter().enumerate() {
        if !(w.position.iter().all(|c| c.is_finite()) && w.yaw.is_finite() && w.hover_time.is_finite() && w.hover_time >= 0.0) {
            return Err(TrajectoryError::NonFinite(i));
        }
    }
    let mut segs = Vec::new();
    let mut yaw = waypoints[0].yaw;
    for (i, w) in waypoints.iter().enumerate() {
        if i > 0 {
            let prev = &waypoints[i - 1];
            let target_yaw = yaw + wrap_angle(w.yaw - yaw);
            let seg = plan_segment(
                (prev.position(), yaw),
                (w.position(), target_yaw),
                limits,
                SegmentKind::Transit { from: i - 1, to: i },
            )
            .map_err(|_| TrajectoryError::CoincidentWaypoints(i - 1, i))?;
            segs.push(seg);
            yaw = target_yaw;
        }
        if w.hover_time > 0.0 {
            segs.push(PolySegment::hover(w.position(), yaw, w.hover_time, i, w.action));
        }
    }
    Ok(PolyTrajectory::from_segments(segs))
}

/// Flat outputs at time `t`. Times outside the trajectory are clamped to the
/// nearest end; the flag reports clamping.
pub fn sample_trajectory(traj: &PolyTrajectory, t: f64) -> (FlatSample, bool) {
    let total = traj.duration();
    let clamped = !(0.0..=total).contains(&t);
    let t = t.clamp(0.0, total);
    let k = traj.segment_at(t);
    let seg = &traj.segments[k];
    let tl = (t - traj.start_times[k]).clamp(0.0, seg.duration);
    let a = seg.derivative(tl, 2);
    let j = seg.derivative(tl, 3);
    let psi = seg.yaw_derivative(tl, 0);
    let psi_dot = seg.yaw_derivative(tl, 1);
    (
        FlatSample {
            p_ref: seg.derivative(tl, 0),
            v_ref: seg.derivative(tl, 1),
            a_ff: a,
            psi_ref: wrap_angle(psi),
            omega_ff: body_rates_from_flat(&a, &j, psi, psi_dot),
        },
        clamped,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::log_quat;
    use crate::trajectory::attitude_from_flat;
    use proptest::prelude::*;

    fn two(a: Vec3, b: Vec3) -> Vec<Waypoint> {
        vec![Waypoint::new(a, 0.0, 0.0), Waypoint::new(b, 0.0, 0.0)]
    }

    #[test]
    fn boundary_conditions_and_midpoint() {
        let tr = plan_mission_trajectory(&two(Vec3::new(0.0, 0.0, 4.0), Vec3::new(10.0, 0.0, 4.0)), &TrajectoryLimits::default()).unwrap();
        let seg = &tr.segments[0];
        let t = seg.duration;
        assert!((seg.derivative(0.0, 0) - Vec3::new(0.0, 0.0, 4.0)).norm() < 1e-12);
        assert!((seg.derivative(t, 0) - Vec3::new(10.0, 0.0, 4.0)).norm() < 1e-9);
        for n in 1..5 {
            assert!(seg.derivative(0.0, n).norm() < 1e-12);
            assert!(seg.derivative(t, n).norm() < 1e-9, "n={n}");
        }
        assert!((seg.derivative(0.5 * t, 0) - Vec3::new(5.0, 0.0, 4.0)).norm() < 1e-9);
    }

    #[test]
    fn matches_closed_form_profile() {
        // β(s) = 126s⁵ − 420s⁶ + 540s⁷ − 315s⁸ + 70s⁹.
        let c = rest_to_rest(0.0, 1.0);
        let beta = [0.0, 0.0, 0.0, 0.0, 0.0, 126.0, -420.0, 540.0, -315.0, 70.0];
        for k in 0..DEG {
            assert!((c[k] - beta[k]).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn peak_speed_factor() {
        let (d, t) = (7.0, 3.0);
        let mut seg = plan_segment((Vec3::zeros(), 0.0), (Vec3::new(d, 0.0, 0.0), 0.0), &TrajectoryLimits::default(), SegmentKind::Transit { from: 0, to: 1 }).unwrap();
        seg.duration = t;
        let peak = (0..=10_000).map(|i| seg.derivative(t * i as f64 / 10_000.0, 1).norm()).fold(0.0, f64::max);
        assert!((peak - SPEED_PEAK_FACTOR * d / t).abs() < 1e-9);
        let acc = (0..=100_000).map(|i| seg.derivative(t * i as f64 / 100_000.0, 2).norm()).fold(0.0, f64::max);
        assert!((acc - ACCEL_PEAK_FACTOR * d / (t * t)).abs() < 1e-6);
    }

    #[test]
    fn hover_segment_is_static() {
        let mut w = two(Vec3::new(0.0, 0.0, 4.0), Vec3::new(3.0, 4.0, 4.0));
        w[1].hover_time = 5.0;
        w[1].yaw = 1.0;
        let tr = plan_mission_trajectory(&w, &TrajectoryLimits::default()).unwrap();
        assert_eq!(tr.segments.len(), 2);
        let mid = tr.start_times[1] + 2.5;
        let (s, clamped) = sample_trajectory(&tr, mid);
        assert!(!clamped);
        assert!((s.p_ref - Vec3::new(3.0, 4.0, 4.0)).norm() < 1e-9);
        assert_eq!((s.v_ref, s.a_ff, s.omega_ff), (Vec3::zeros(), Vec3::zeros(), Vec3::zeros()));
        assert!((s.psi_ref - 1.0).abs() < 1e-12);
        let (s0, _) = sample_trajectory(&tr, 0.0);
        assert_eq!((s0.v_ref, s0.a_ff, s0.omega_ff), (Vec3::zeros(), Vec3::zeros(), Vec3::zeros()));
        let (_, c) = sample_trajectory(&tr, tr.duration() + 1.0);
        assert!(c);
    }

    #[test]
    fn planning_errors() {
        let l = TrajectoryLimits::default();
        assert_eq!(plan_mission_trajectory(&two(Vec3::zeros(), Vec3::zeros()), &l), Err(TrajectoryError::CoincidentWaypoints(0, 1)));
        assert_eq!(plan_mission_trajectory(&two(Vec3::zeros(), Vec3::zeros())[..1], &l), Err(TrajectoryError::TooFewWaypoints));
        assert_eq!(plan_mission_trajectory(&two(Vec3::zeros(), Vec3::new(f64::NAN, 0.0, 0.0)), &l), Err(TrajectoryError::NonFinite(1)));
    }

    #[test]
    fn yaw_takes_short_way() {
        let mut w = two(Vec3::zeros(), Vec3::new(5.0, 0.0, 0.0));
        w[0].yaw = 3.0;
        w[1].yaw = -3.0;
        let tr = plan_mission_trajectory(&w, &TrajectoryLimits::default()).unwrap();
        let seg = &tr.segments[0];
        let total = seg.yaw_derivative(seg.duration, 0) - seg.yaw_derivative(0.0, 0);
        assert!((total - wrap_angle(-6.0)).abs() < 1e-12);
    }

    fn random_waypoints() -> impl Strategy<Value = Vec<Waypoint>> {
        prop::collection::vec(((-20.0..20.0f64, -20.0..20.0f64, 1.0..15.0f64), -3.0..3.0f64, prop::bool::ANY), 2..6).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, ((x, y, z), yaw, h))| Waypoint::new(Vec3::new(x + 50.0 * i as f64, y, z), yaw, if h { 1.5 } else { 0.0 }))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn limits_respected_and_joints_smooth(w in random_waypoints(), v_max in 0.5..5.0f64, a_max in 0.5..5.0f64) {
            let l = TrajectoryLimits { v_max, a_max };
            let tr = plan_mission_trajectory(&w, &l).unwrap();
            let n = 2000;
            for i in 0..=n {
                let (s, _) = sample_trajectory(&tr, tr.duration() * i as f64 / n as f64);
                prop_assert!(s.v_ref.norm() <= v_max * (1.0 + 1e-6));
                prop_assert!(s.a_ff.norm() <= a_max * (1.0 + 1e-6));
            }
            for k in 1..tr.segments.len() {
                let (a, b) = (&tr.segments[k - 1], &tr.segments[k]);
                for n in 0..5 {
                    // Rounding grows with the coefficient magnitude.
                    let scale = a.coeffs.iter().chain(b.coeffs.iter()).flatten().fold(1.0f64, |m, c| m.max(c.abs()));
                    let da = a.derivative(a.duration, n);
                    let db = b.derivative(0.0, n);
                    prop_assert!((da - db).norm() < 1e-8 * scale, "joint {} n {}", k, n);
                }
            }
        }

        #[test]
        fn planning_is_deterministic(w in random_waypoints()) {
            let l = TrajectoryLimits::default();
            prop_assert_eq!(plan_mission_trajectory(&w, &l).unwrap(), plan_mission_trajectory(&w, &l).unwrap());
        }

        #[test]
        fn omega_ff_matches_attitude_difference(w in random_waypoints(), frac in 0.02..0.98f64) {
            let tr = plan_mission_trajectory(&w, &TrajectoryLimits::default()).unwrap();
            let t = tr.duration() * frac;
            let h = 1e-5;
            let att = |t: f64| {
                let (s, _) = sample_trajectory(&tr, t);
                attitude_from_flat(&s.a_ff, s.psi_ref)
            };
            let k = tr.segment_at(t);
            // Stay inside one segment for the difference quotient.
            prop_assume!(t - h > tr.start_times[k] && t + h < tr.start_times[k] + tr.segments[k].duration);
            let fd = log_quat(&(att(t - h).inverse() * att(t + h))) / (2.0 * h);
            let (s, _) = sample_trajectory(&tr, t);
            prop_assert!((s.omega_ff - fd).amax() < 1e-4, "{} vs {}", s.omega_ff, fd);
        }
    }
}
