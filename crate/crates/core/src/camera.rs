//! Pinhole camera model shared by the detection simulator and the pose estimator.

use crate::geometry::{rotmat, RotMat3, UnitQuat, Vec3};
use nalgebra::{Matrix3, Quaternion, Vector2};
use serde::{Deserialize, Serialize};

pub type Pixel = Vector2<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view, degrees.
    pub hfov_deg: f64,
    /// Camera optical center in the body frame, m.
    pub mount_position: [f64; 3],
    /// Camera-to-body rotation as scalar-first quaternion. The camera frame is
    /// x right, y down, z along the optical axis.
    pub mount_rotation: [f64; 4],
    pub rate_hz: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self::from_fov(752, 480, 100.0, 20.0)
    }
}

impl CameraModel {
    /// Square-pixel camera with the principal point at the image center, mounted
    /// 5 cm above the body origin looking straight down.
    pub fn from_fov(width: u32, height: u32, hfov_deg: f64, rate_hz: f64) -> Self {
        let f = 0.5 * width as f64 / (0.5 * hfov_deg.to_radians()).tan();
        let down = nadir_mount();
        Self {
            fx: f,
            fy: f,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
            hfov_deg,
            mount_position: [0.0, 0.0, 0.05],
            mount_rotation: [down.w, down.i, down.j, down.k],
            rate_hz,
        }
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn mount_position(&self) -> Vec3 {
        Vec3::from(self.mount_position)
    }

    pub fn mount_rotation(&self) -> UnitQuat {
        let [w, x, y, z] = self.mount_rotation;
        UnitQuat::new_normalize(Quaternion::new(w, x, y, z))
    }

    /// Projects a point given in camera coordinates. `None` behind the camera.
    #[inline]
    pub fn project_camera_point(&self, p: &Vec3) -> Option<Pixel> {
        if p.z <= 1e-9 {
            return None;
        }
        Some(Pixel::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    pub fn in_image(&self, px: &Pixel) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x <= self.width as f64 && px.y <= self.height as f64
    }

    /// Checks that the configured focal length agrees with the field of view.
    pub fn fov_consistent(&self, tol_deg: f64) -> bool {
        let implied = 2.0 * (0.5 * self.width as f64 / self.fx).atan().to_degrees();
        (implied - self.hfov_deg).abs() <= tol_deg
    }
}

/// Camera-to-body rotation for a downward-looking camera whose image x axis is
/// body -y and image y axis is body -x.
pub fn nadir_mount() -> UnitQuat {
    let m = RotMat3::from_columns(&[
        Vec3::new(0.0, -1.0, 0.0),
        Vec3::new(-1.0, 0.0, 0.0),
        Vec3::new(0.0, 0.0, -1.0),
    ]);
    UnitQuat::from_matrix(&m)
}

/// Rigid transform of the camera in some parent frame (camera-to-parent).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: UnitQuat,
    pub position: Vec3,
}

impl CameraPose {
    /// Camera pose in the world frame given the body pose and the mount.
    pub fn from_body(body_pos: &Vec3, body_att: &UnitQuat, cam: &CameraModel) -> Self {
        Self {
            rotation: body_att * cam.mount_rotation(),
            position: body_pos + rotmat(body_att) * cam.mount_position(),
        }
    }

    /// Expresses a parent-frame point in camera coordinates.
    #[inline]
    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        rotmat(&self.rotation).transpose() * (p - self.position)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_camera_matches_fov() {
        let c = CameraModel::default();
        assert!(c.fov_consistent(1e-9));
        assert!((c.fx - 376.0 / 50f64.to_radians().tan()).abs() < 1e-12);
    }

    #[test]
    fn nadir_camera_looks_down() {
        let cam = CameraModel::default();
        let pose = CameraPose::from_body(&Vec3::new(0.0, 0.0, 4.0), &UnitQuat::identity(), &cam);
        let pc = pose.to_camera(&Vec3::zeros());
        assert!((pc - Vec3::new(0.0, 0.0, 4.05)).norm() < 1e-12);
        let px = cam.project_camera_point(&pc).unwrap();
        assert!((px - Pixel::new(cam.cx, cam.cy)).norm() < 1e-9);
        // A point ahead of the vehicle (+x body) appears toward the top of the image.
        let ahead = cam.project_camera_point(&pose.to_camera(&Vec3::new(1.0, 0.0, 0.0))).unwrap();
        assert!(ahead.y < cam.cy);
    }
}
