use super::TrueVehicleState;
use crate::geometry::{rotmat, yaw_of, yaw_quat, Vec3};
use serde::{Deserialize, Serialize};

/// Square charging platform on flat ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PadGeometry {
    /// Center of the pad surface (the landing point), world frame.
    pub center: [f64; 3],
    pub yaw: f64,
    /// Edge length of the square platform, m.
    pub size: f64,
    pub ground_height: f64,
}

impl Default for PadGeometry {
    fn default() -> Self {
        Self { center: [0.0, 0.0, 0.15], yaw: 0.3, size: 0.9, ground_height: 0.0 }
    }
}

impl PadGeometry {
    pub fn center(&self) -> Vec3 {
        Vec3::from(self.center)
    }

    /// Horizontal offset of a world point from the pad center, in pad axes.
    pub fn local_offset(&self, p: &Vec3) -> (f64, f64) {
        let d = rotmat(&yaw_quat(self.yaw)).transpose() * (p - self.center());
        (d.x, d.y)
    }

    pub fn contains_xy(&self, p: &Vec3) -> bool {
        let (x, y) = self.local_offset(p);
        let h = 0.5 * self.size;
        x.abs() <= h && y.abs() <= h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactKind {
    None,
    Pad,
    Ground,
}

/// Resolves touchdown: a vehicle descending through the pad surface inside the
/// pad bounds (or through the ground plane elsewhere) is clamped onto it, its
/// motion zeroed and its attitude leveled.
pub fn pad_contact(state: &TrueVehicleState, pad: &PadGeometry) -> (TrueVehicleState, ContactKind) {
    if state.on_ground {
        return (state.clone(), ContactKind::None);
    }
    let on_pad = pad.contains_xy(&state.position);
    let surface = if on_pad { pad.center[2] } else { pad.ground_height };
    if state.position.z > surface || state.velocity.z >= 0.0 {
        return (state.clone(), ContactKind::None);
    }
    let mut s = state.clone();
    s.position.z = surface;
    s.velocity = Vec3::zeros();
    s.body_rates = Vec3::zeros();
    s.attitude = yaw_quat(yaw_of(&state.attitude));
    s.on_ground = true;
    (s, if on_pad { ContactKind::Pad } else { ContactKind::Ground })
}
