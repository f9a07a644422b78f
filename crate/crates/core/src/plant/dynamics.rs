use super::{PlantError, TrueVehicleState, VehicleParams};
use crate::geometry::{gravity, is_finite, rotmat, UnitQuat, Vec3};
use nalgebra::{Matrix4, Quaternion};

/// Quad-X rotor layout in the body frame: (x sign, y sign, yaw-torque sign).
/// Order is front-left, rear-left, rear-right, front-right.
pub const MOTOR_LAYOUT: [(f64, f64, f64); 4] = [
    (1.0, 1.0, 1.0),
    (-1.0, 1.0, -1.0),
    (-1.0, -1.0, 1.0),
    (1.0, -1.0, -1.0),
];

/// Maps per-motor thrusts to `[T, τx, τy, τz]`.
pub fn allocation_matrix(params: &VehicleParams) -> Matrix4<f64> {
    let d = params.arm_length / std::f64::consts::SQRT_2;
    let k = params.torque_per_thrust();
    let mut a = Matrix4::zeros();
    for (i, &(sx, sy, s)) in MOTOR_LAYOUT.iter().enumerate() {
        a[(0, i)] = 1.0;
        a[(1, i)] = sy * d;
        a[(2, i)] = -sx * d;
        a[(3, i)] = s * k;
    }
    a
}

pub fn motor_thrusts(speeds: &[f64; 4], params: &VehicleParams) -> [f64; 4] {
    speeds.map(|w| params.thrust_coeff * w * w)
}

fn wrench(speeds: &[f64; 4], params: &VehicleParams) -> (f64, Vec3) {
    let f = motor_thrusts(speeds, params);
    let a = allocation_matrix(params);
    let w = a * nalgebra::Vector4::from(f);
    (w[0], Vec3::new(w[1], w[2], w[3]))
}

/// World-frame acceleration of the free-flying vehicle.
pub fn linear_acceleration(
    state: &TrueVehicleState,
    wind: &Vec3,
    params: &VehicleParams,
) -> Vec3 {
    if state.on_ground {
        return Vec3::zeros();
    }
    let (thrust, _) = wrench(&state.motor_speeds, params);
    free_acceleration(&state.attitude, &state.velocity, thrust, wind, params)
}

fn free_acceleration(q: &UnitQuat, v: &Vec3, thrust: f64, wind: &Vec3, p: &VehicleParams) -> Vec3 {
    let thrust_world = rotmat(q) * Vec3::new(0.0, 0.0, thrust);
    (thrust_world - p.drag_coeff * (v - wind)) / p.mass + gravity()
}

#[derive(Clone, Copy)]
struct Deriv {
    dp: Vec3,
    dv: Vec3,
    dq: Quaternion<f64>,
    dw: Vec3,
    dm: [f64; 4],
}

#[derive(Clone, Copy)]
struct Rb {
    p: Vec3,
    v: Vec3,
    q: Quaternion<f64>,
    w: Vec3,
    m: [f64; 4],
}

impl Rb {
    fn add(&self, d: &Deriv, h: f64) -> Rb {
        let mut m = self.m;
        for (mi, di) in m.iter_mut().zip(d.dm) {
            *mi += h * di;
        }
        Rb {
            p: self.p + d.dp * h,
            v: self.v + d.dv * h,
            q: self.q + d.dq * h,
            w: self.w + d.dw * h,
            m,
        }
    }
}

fn derivative(s: &Rb, cmd_speed: &[f64; 4], wind: &Vec3, p: &VehicleParams) -> Deriv {
    let q = UnitQuat::new_normalize(s.q);
    let (thrust, torque) = wrench(&s.m, p);
    let j = p.inertia();
    let jw = j.component_mul(&s.w);
    let dw = (torque - s.w.cross(&jw)).component_div(&j);
    let dq = s.q * Quaternion::new(0.0, s.w.x, s.w.y, s.w.z) * 0.5;
    let mut dm = [0.0; 4];
    for i in 0..4 {
        dm[i] = (cmd_speed[i] - s.m[i]) / p.motor_time_constant;
    }
    Deriv {
        dp: s.v,
        dv: free_acceleration(&q, &s.v, thrust, wind, p),
        dq,
        dw,
        dm,
    }
}

/// Advances the plant by `dt` with RK4. `motor_cmds` are per-motor thrust
/// commands in newtons; each rotor follows its command with a first-order lag
/// on speed.
///
/// A vehicle resting on a surface stays frozen until the net vertical force
/// becomes positive. Surface penetration while airborne is resolved
/// separately by [`super::pad_contact`].
pub fn step_dynamics(
    state: &TrueVehicleState,
    motor_cmds: &[f64; 4],
    wind: &Vec3,
    params: &VehicleParams,
    dt: f64,
) -> Result<TrueVehicleState, PlantError> {
    if !(dt > 0.0 && dt <= 0.01) {
        return Err(PlantError::InvalidStep(dt));
    }
    if motor_cmds.iter().any(|c| !c.is_finite()) {
        return Err(PlantError::NonFinite("motor command"));
    }
    if !is_finite(wind) {
        return Err(PlantError::NonFinite("wind"));
    }
    if !is_finite(&state.position) || !is_finite(&state.velocity) || !is_finite(&state.body_rates) {
        return Err(PlantError::NonFinite("state"));
    }
    let map = params.motor_map();
    let cmd_speed = motor_cmds.map(|f| map.speed_for_thrust(f));

    let mut next = state.clone();
    next.time = state.time + dt;

    if state.on_ground {
        // Only the rotors evolve while resting; liftoff once thrust beats weight.
        let decay = (-dt / params.motor_time_constant).exp();
        for i in 0..4 {
            next.motor_speeds[i] = cmd_speed[i] + (state.motor_speeds[i] - cmd_speed[i]) * decay;
        }
        let (thrust, _) = wrench(&next.motor_speeds, params);
        let up = (rotmat(&state.attitude) * Vec3::new(0.0, 0.0, thrust)).z;
        if up - params.mass * crate::geometry::GRAVITY <= 0.0 {
            next.velocity = Vec3::zeros();
            next.body_rates = Vec3::zeros();
            return Ok(next);
        }
        next.on_ground = false;
        return Ok(next);
    }

    let s0 = Rb {
        p: state.position,
        v: state.velocity,
        q: state.attitude.into_inner(),
        w: state.body_rates,
        m: state.motor_speeds,
    };
    let k1 = derivative(&s0, &cmd_speed, wind, params);
    let k2 = derivative(&s0.add(&k1, 0.5 * dt), &cmd_speed, wind, params);
    let k3 = derivative(&s0.add(&k2, 0.5 * dt), &cmd_speed, wind, params);
    let k4 = derivative(&s0.add(&k3, dt), &cmd_speed, wind, params);
    let h6 = dt / 6.0;
    let comb = |a: Vec3, b: Vec3, c: Vec3, d: Vec3| (a + (b + c) * 2.0 + d) * h6;
    next.position = s0.p + comb(k1.dp, k2.dp, k3.dp, k4.dp);
    next.velocity = s0.v + comb(k1.dv, k2.dv, k3.dv, k4.dv);
    next.body_rates = s0.w + comb(k1.dw, k2.dw, k3.dw, k4.dw);
    let dq = (k1.dq + (k2.dq + k3.dq) * 2.0 + k4.dq) * h6;
    next.attitude = crate::geometry::normalize(s0.q + dq);
    for i in 0..4 {
        let dm = (k1.dm[i] + 2.0 * (k2.dm[i] + k3.dm[i]) + k4.dm[i]) * h6;
        next.motor_speeds[i] = (s0.m[i] + dm).max(0.0);
    }
    if !is_finite(&next.position) || !is_finite(&next.velocity) {
        return Err(PlantError::NonFinite("integrated state"));
    }
    Ok(next)
}
