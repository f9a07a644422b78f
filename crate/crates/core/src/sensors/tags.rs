use super::gauss;
use crate::camera::{CameraModel, CameraPose, Pixel};
use crate::geometry::{rotmat, yaw_quat};
use crate::plant::{PadGeometry, TrueVehicleState};
use crate::vision::TagBundleSpec;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Relative slack on the edge-length thresholds so that a tag sitting exactly
/// on a calibrated cutoff is still detected.
const BOUNDARY_EPS: f64 = 1e-9;

/// Size-dependent detection window on the mean projected edge length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TagVisibility {
    /// Smallest mean edge length that still decodes, px.
    pub min_edge_px: f64,
    /// Largest mean edge length as a fraction of the image width.
    pub max_edge_frac: f64,
}

impl Default for TagVisibility {
    fn default() -> Self {
        Self::calibrated(&CameraModel::default(), 0.15, 4.0, 0.48, 2.0)
    }
}

impl TagVisibility {
    /// Thresholds such that a nadir camera sees a `small` tag up to
    /// `small_max_range` and a `large` tag down to `large_min_range`.
    pub fn calibrated(cam: &CameraModel, small: f64, small_max_range: f64, large: f64, large_min_range: f64) -> Self {
        Self {
            min_edge_px: cam.fx * small / small_max_range,
            max_edge_frac: cam.fx * large / large_min_range / cam.width as f64,
        }
    }

    pub fn accepts(&self, mean_edge_px: f64, image_width: u32) -> bool {
        mean_edge_px >= self.min_edge_px * (1.0 - BOUNDARY_EPS)
            && mean_edge_px <= self.max_edge_frac * image_width as f64 * (1.0 + BOUNDARY_EPS)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagDetection {
    pub tag_id: u32,
    /// Corner pixels in the order of `TagSpec::corners`.
    pub corners: [Pixel; 4],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TagDetectionSet {
    pub detections: Vec<TagDetection>,
    pub time: f64,
}

impl TagDetectionSet {
    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn get(&self, id: u32) -> Option<&TagDetection> {
        self.detections.iter().find(|d| d.tag_id == id)
    }
}

/// Simulated tag detector for the camera on the vehicle in `truth`, with the
/// bundle laid out in the landing frame of `pad`.
pub fn sample_tag_detections<R: Rng>(
    truth: &TrueVehicleState,
    camera: &CameraModel,
    bundle: &TagBundleSpec,
    pad: &PadGeometry,
    visibility: &TagVisibility,
    pixel_sigma: f64,
    rng: &mut R,
) -> TagDetectionSet {
    let cam = CameraPose::from_body(&truth.position, &truth.attitude, camera);
    detect_from_pose(&cam, camera, bundle, pad, visibility, pixel_sigma, truth.time, rng)
}

/// Same as [`sample_tag_detections`] for an explicit camera pose in the world.
#[allow(clippy::too_many_arguments)]
pub fn detect_from_pose<R: Rng>(
    cam: &CameraPose,
    camera: &CameraModel,
    bundle: &TagBundleSpec,
    pad: &PadGeometry,
    visibility: &TagVisibility,
    pixel_sigma: f64,
    time: f64,
    rng: &mut R,
) -> TagDetectionSet {
    let mut out = TagDetectionSet { detections: Vec::new(), time };
    if cam.position.z <= pad.center[2] {
        return out;
    }
    let r_wl = rotmat(&yaw_quat(pad.yaw));
    let t_wl = pad.center();
    for tag in &bundle.tags {
        let mut px = [Pixel::zeros(); 4];
        let mut ok = true;
        for (k, c) in tag.corners().iter().enumerate() {
            match camera.project_camera_point(&cam.to_camera(&(t_wl + r_wl * c))) {
                Some(p) if camera.in_image(&p) => px[k] = p,
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let edge = (0..4).map(|k| (px[(k + 1) % 4] - px[k]).norm()).sum::<f64>() / 4.0;
        if !visibility.accepts(edge, camera.width) {
            continue;
        }
        if pixel_sigma > 0.0 {
            for p in px.iter_mut() {
                p.x += pixel_sigma * gauss(rng);
                p.y += pixel_sigma * gauss(rng);
            }
            if !px.iter().all(|p| camera.in_image(p)) {
                continue;
            }
        }
        out.detections.push(TagDetection { tag_id: tag.id, corners: px });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::vision::TagSpec;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn above(pad: &PadGeometry, h: f64) -> TrueVehicleState {
        // Body origin placed so that the camera sits exactly `h` above the pad.
        let cam = CameraModel::default();
        let p = pad.center() + Vec3::new(0.0, 0.0, h - cam.mount_position[2]);
        TrueVehicleState::landed(p, pad.yaw)
    }

    fn ids(h: f64) -> Vec<u32> {
        let pad = PadGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = sample_tag_detections(
            &above(&pad, h),
            &CameraModel::default(),
            &TagBundleSpec::default(),
            &pad,
            &TagVisibility::default(),
            0.0,
            &mut rng,
        );
        d.detections.iter().map(|d| d.tag_id).collect()
    }

    #[test]
    fn cutoffs_at_default_heights() {
        assert_eq!(ids(4.0), vec![0, 1, 2, 3]);
        assert_eq!(ids(1.0), vec![1, 2, 3]);
        assert_eq!(ids(2.0), vec![0, 1, 2, 3]);
        assert_eq!(ids(1.99), vec![1, 2, 3]);
        assert_eq!(ids(4.01), vec![0]);
    }

    #[test]
    fn below_pad_sees_nothing() {
        let pad = PadGeometry::default();
        let mut s = above(&pad, 1.0);
        s.position.z = pad.center[2] - 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = sample_tag_detections(&s, &CameraModel::default(), &TagBundleSpec::default(), &pad, &TagVisibility::default(), 0.0, &mut rng);
        assert!(d.is_empty());
    }

    #[test]
    fn noiseless_corners_match_projection() {
        let pad = PadGeometry::default();
        let cam = CameraModel::default();
        let mut truth = above(&pad, 3.0);
        truth.position += Vec3::new(0.1, -0.2, 0.0);
        truth.attitude = crate::geometry::from_euler(0.05, -0.03, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bundle = TagBundleSpec::default();
        let d = sample_tag_detections(&truth, &cam, &bundle, &pad, &TagVisibility::default(), 0.0, &mut rng);
        assert!(!d.is_empty());
        // Independent projection: p_c = R_cbᵀ (R_wbᵀ (p_w - p_b) - t_cb).
        let r_wb = rotmat(&truth.attitude);
        let r_cb = rotmat(&cam.mount_rotation());
        for det in &d.detections {
            let tag = bundle.get(det.tag_id).unwrap();
            for (k, c) in tag.corners().iter().enumerate() {
                let pw = pad.center() + rotmat(&yaw_quat(pad.yaw)) * c;
                let pc = r_cb.transpose() * (r_wb.transpose() * (pw - truth.position) - cam.mount_position());
                let u = cam.fx * pc.x / pc.z + cam.cx;
                let v = cam.fy * pc.y / pc.z + cam.cy;
                assert!((det.corners[k] - Pixel::new(u, v)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn twenty_cm_tag_range() {
        let vis = TagVisibility::default();
        let cam = CameraModel::default();
        // Nadir edge length is fx * size / range.
        assert!(vis.accepts(cam.fx * 0.20 / 5.3, cam.width));
        assert!(!vis.accepts(cam.fx * 0.20 / 5.4, cam.width));
    }

    proptest! {
        #[test]
        fn detection_count_monotone_in_min_edge(h in 0.5..8.0f64, a in 0.0..60.0f64, b in 0.0..60.0f64) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let pad = PadGeometry::default();
            let bundle = TagBundleSpec::new(vec![
                TagSpec { id: 0, size: 0.48, x: 0.0, y: 0.0, yaw: 0.0 },
                TagSpec { id: 1, size: 0.15, x: 0.35, y: 0.0, yaw: 0.0 },
                TagSpec { id: 2, size: 0.30, x: -0.3, y: 0.2, yaw: 0.4 },
            ]).unwrap();
            let count = |min_edge_px: f64| {
                let vis = TagVisibility { min_edge_px, max_edge_frac: 10.0 };
                let mut rng = ChaCha8Rng::seed_from_u64(1);
                sample_tag_detections(&above(&pad, h), &CameraModel::default(), &bundle, &pad, &vis, 0.0, &mut rng).len()
            };
            prop_assert!(count(hi) <= count(lo));
        }
    }
}
