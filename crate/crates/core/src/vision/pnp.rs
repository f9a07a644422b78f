//! Camera pose in the landing frame from tag corners.
//!
//! The pose is parameterized as the landing-to-camera transform
//! `p_c = R_cl p_l + t_cl` during optimization and reported as the
//! camera-to-landing pose.

use super::{TagBundleSpec, VisionError};
use crate::camera::{CameraModel, CameraPose, Pixel};
use crate::geometry::{exp_quat, rotmat, skew, Mat3, UnitQuat, Vec3};
use crate::sensors::TagDetectionSet;
use nalgebra::{Matrix6, SMatrix, SVector, Vector6};

pub const LM_MAX_ITERATIONS: usize = 50;
const LM_STEP_TOL: f64 = 1e-8;
const LM_MAX_DAMPING: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPoseEstimate {
    /// Camera-to-landing rotation.
    pub orientation: UnitQuat,
    /// Camera position in the landing frame, m.
    pub position: Vec3,
    /// Root-mean-square corner reprojection error, px.
    pub reprojection_rms: f64,
    pub n_tags_used: usize,
}

impl CameraPoseEstimate {
    pub fn pose(&self) -> CameraPose {
        CameraPose { rotation: self.orientation, position: self.position }
    }
}

/// Matched landing-frame points and observed pixels.
fn correspondences(dets: &TagDetectionSet, bundle: &TagBundleSpec) -> (Vec<Vec3>, Vec<Pixel>, usize) {
    let (mut pts, mut px, mut n) = (Vec::new(), Vec::new(), 0);
    for d in &dets.detections {
        if let Some(tag) = bundle.get(d.tag_id) {
            pts.extend_from_slice(&tag.corners());
            px.extend_from_slice(&d.corners);
            n += 1;
        }
    }
    (pts, px, n)
}

#[inline]
fn project(cam: &CameraModel, r: &Mat3, t: &Vec3, p: &Vec3) -> Option<(Pixel, Vec3)> {
    let pc = r * p + t;
    cam.project_camera_point(&pc).map(|u| (u, pc))
}

fn cost(cam: &CameraModel, r: &Mat3, t: &Vec3, pts: &[Vec3], px: &[Pixel]) -> f64 {
    let mut c = 0.0;
    for (p, obs) in pts.iter().zip(px) {
        match project(cam, r, t, p) {
            Some((u, _)) => c += (u - obs).norm_squared(),
            None => return f64::INFINITY,
        }
    }
    c
}

/// Sum of squared corner reprojection errors of a camera-to-landing pose.
pub fn reprojection_cost(dets: &TagDetectionSet, bundle: &TagBundleSpec, camera: &CameraModel, pose: &CameraPose) -> f64 {
    let (pts, px, _) = correspondences(dets, bundle);
    let r = rotmat(&pose.rotation).transpose();
    cost(camera, &r, &(-r * pose.position), &pts, &px)
}

/// Closed-form pose from the planar homography of one tag's four corners.
pub fn homography_pose(landing: &[Vec3], pixels: &[Pixel], camera: &CameraModel) -> Result<CameraPose, VisionError> {
    if landing.len() < 4 || landing.len() != pixels.len() {
        return Err(VisionError::EstimationFailed("homography needs four or more points".into()));
    }
    // DLT in normalized image coordinates; the null vector of AᵀA gives H.
    let mut ata = SMatrix::<f64, 9, 9>::zeros();
    for (p, u) in landing.iter().zip(pixels) {
        let x = (u.x - camera.cx) / camera.fx;
        let y = (u.y - camera.cy) / camera.fy;
        let r1 = SVector::<f64, 9>::from_column_slice(&[p.x, p.y, 1.0, 0.0, 0.0, 0.0, -x * p.x, -x * p.y, -x]);
        let r2 = SVector::<f64, 9>::from_column_slice(&[0.0, 0.0, 0.0, p.x, p.y, 1.0, -y * p.x, -y * p.y, -y]);
        ata += r1 * r1.transpose() + r2 * r2.transpose();
    }
    let eig = ata.symmetric_eigen();
    let (k, _) = eig.eigenvalues.iter().enumerate().fold((0, f64::INFINITY), |(bi, bv), (i, &v)| {
        if v < bv { (i, v) } else { (bi, bv) }
    });
    let h = eig.eigenvectors.column(k);
    let h1 = Vec3::new(h[0], h[3], h[6]);
    let h2 = Vec3::new(h[1], h[4], h[7]);
    let h3 = Vec3::new(h[2], h[5], h[8]);
    let mut s = 2.0 / (h1.norm() + h2.norm());
    if !s.is_finite() {
        return Err(VisionError::EstimationFailed("degenerate homography".into()));
    }
    if h3.z * s < 0.0 {
        s = -s;
    }
    let (r1, r2, t) = (h1 * s, h2 * s, h3 * s);
    let m = Mat3::from_columns(&[r1, r2, r1.cross(&r2)]);
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r_cl = u * vt;
    if r_cl.determinant() < 0.0 {
        let d = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        r_cl = u * d * vt;
    }
    let r_lc = r_cl.transpose();
    Ok(CameraPose {
        rotation: UnitQuat::from_matrix(&r_lc),
        position: -(r_lc * t),
    })
}

/// Camera pose in the landing frame by Levenberg-Marquardt minimization of
/// the corner reprojection error. Starts from `init` when given, otherwise
/// from the homography of the largest detected tag.
pub fn estimate_camera_pose(
    dets: &TagDetectionSet,
    bundle: &TagBundleSpec,
    camera: &CameraModel,
    init: Option<&CameraPose>,
) -> Result<CameraPoseEstimate, VisionError> {
    let (pts, px, n_tags) = correspondences(dets, bundle);
    if n_tags == 0 {
        return Err(VisionError::NoDetection);
    }
    let start = match init {
        Some(p) => *p,
        None => {
            let largest = dets
                .detections
                .iter()
                .filter_map(|d| bundle.get(d.tag_id).map(|t| (t, d)))
                .max_by(|a, b| a.0.size.total_cmp(&b.0.size))
                .expect("at least one known tag");
            homography_pose(&largest.0.corners(), &largest.1.corners, camera)?
        }
    };
    let mut r = rotmat(&start.rotation).transpose();
    let mut t = -(r * start.position);
    let mut c = cost(camera, &r, &t, &pts, &px);
    if !c.is_finite() {
        return Err(VisionError::EstimationFailed("initial pose puts tags behind the camera".into()));
    }
    let mut mu = -1.0;
    for _ in 0..LM_MAX_ITERATIONS {
        let mut jtj = Matrix6::<f64>::zeros();
        let mut jtr = Vector6::<f64>::zeros();
        for (p, obs) in pts.iter().zip(&px) {
            let (u, pc) = project(camera, &r, &t, p).expect("finite cost implies points in front");
            let res = u - obs;
            let iz = 1.0 / pc.z;
            let dproj = nalgebra::Matrix2x3::new(
                camera.fx * iz, 0.0, -camera.fx * pc.x * iz * iz,
                0.0, camera.fy * iz, -camera.fy * pc.y * iz * iz,
            );
            // Left perturbation: R ← exp(δφ) R, t ← t + δt.
            let mut dpc = SMatrix::<f64, 3, 6>::zeros();
            dpc.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&(r * p))));
            dpc.fixed_view_mut::<3, 3>(0, 3).copy_from(&Mat3::identity());
            let j = dproj * dpc;
            jtj += j.transpose() * j;
            jtr += j.transpose() * res;
        }
        if mu < 0.0 {
            mu = 1e-3 * jtj.diagonal().max();
        }
        let mut accepted = false;
        let mut step_norm = f64::INFINITY;
        while mu <= LM_MAX_DAMPING {
            let a = jtj + Matrix6::identity() * mu;
            let Some(step) = a.cholesky().map(|ch| ch.solve(&(-jtr))) else {
                mu *= 10.0;
                continue;
            };
            step_norm = step.norm();
            let dphi = Vec3::new(step[0], step[1], step[2]);
            let r_new = rotmat(&exp_quat(&dphi)) * r;
            let t_new = t + Vec3::new(step[3], step[4], step[5]);
            let c_new = cost(camera, &r_new, &t_new, &pts, &px);
            if c_new <= c {
                r = r_new;
                t = t_new;
                c = c_new;
                mu = (mu / 10.0).max(1e-15);
                accepted = true;
                break;
            }
            if step_norm < LM_STEP_TOL {
                break;
            }
            mu *= 10.0;
        }
        if step_norm < LM_STEP_TOL {
            break;
        }
        if !accepted {
            if c.is_finite() {
                break;
            }
            return Err(VisionError::EstimationFailed("cost increase at maximum damping".into()));
        }
    }
    // Re-orthonormalize the accumulated rotation.
    let q_cl = UnitQuat::from_matrix(&r);
    let r_lc = rotmat(&q_cl).transpose();
    Ok(CameraPoseEstimate {
        orientation: q_cl.inverse(),
        position: -(r_lc * t),
        reprojection_rms: (c / pts.len() as f64).sqrt(),
        n_tags_used: n_tags,
    })
}
