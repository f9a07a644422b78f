use super::{estimate_camera_pose, TagBundleSpec, TagSpec, VisionError};
use crate::camera::CameraModel;
use crate::geometry::{rotmat, wrap_angle, Vec3};
use crate::sensors::{TagDetection, TagDetectionSet};

/// Largest accepted per-frame position scatter (standard deviation) of a
/// calibrated tag, m.
pub const CALIBRATION_MAX_SPREAD: f64 = 0.02;
const MIN_FRAMES: usize = 3;

fn single(det: &TagDetection, size: f64) -> (TagDetectionSet, TagBundleSpec) {
    let d = TagDetection { tag_id: 0, corners: det.corners };
    let b = TagBundleSpec { tags: vec![TagSpec { id: 0, size, x: 0.0, y: 0.0, yaw: 0.0 }] };
    (TagDetectionSet { detections: vec![d], time: 0.0 }, b)
}

/// Records each tag's planar pose relative to the master tag, which defines
/// the landing point. Every frame must show the master tag; tags from
/// `tag_sizes` are averaged over the frames they appear in. The master itself
/// is not part of the returned bundle.
pub fn calibrate_bundle(
    frames: &[TagDetectionSet],
    master: &TagSpec,
    tag_sizes: &[(u32, f64)],
    camera: &CameraModel,
) -> Result<TagBundleSpec, VisionError> {
    if frames.len() < MIN_FRAMES {
        return Err(VisionError::InsufficientFrames { got: frames.len(), need: MIN_FRAMES });
    }
    let mut samples: Vec<Vec<(Vec3, f64)>> = vec![Vec::new(); tag_sizes.len()];
    for (i, f) in frames.iter().enumerate() {
        let m = f.get(master.id).ok_or(VisionError::MasterTagMissing { frame: i })?;
        let (md, mb) = single(m, master.size);
        // Camera-to-master pose.
        let cm = estimate_camera_pose(&md, &mb, camera, None)?;
        let r_mc = rotmat(&cm.orientation);
        let mut any = false;
        for (k, &(id, _)) in tag_sizes.iter().enumerate() {
            let Some(det) = f.get(id) else { continue };
            // Intersect the corner rays with the master plane.
            let mut c = [Vec3::zeros(); 4];
            for (j, u) in det.corners.iter().enumerate() {
                let d = r_mc * Vec3::new((u.x - camera.cx) / camera.fx, (u.y - camera.cy) / camera.fy, 1.0);
                if d.z >= 0.0 {
                    return Err(VisionError::EstimationFailed(format!("tag {id} ray misses the plane")));
                }
                c[j] = cm.position - d * (cm.position.z / d.z);
            }
            let center = (c[0] + c[1] + c[2] + c[3]) / 4.0;
            let ax = (c[1] - c[0]) + (c[2] - c[3]);
            samples[k].push((center, ax.y.atan2(ax.x)));
            any = true;
        }
        if !any {
            return Err(VisionError::EstimationFailed(format!("frame {i} has no bundle tag")));
        }
    }
    let mut tags = Vec::new();
    for (k, &(id, size)) in tag_sizes.iter().enumerate() {
        let s = &samples[k];
        if s.is_empty() {
            return Err(VisionError::EstimationFailed(format!("tag {id} never observed")));
        }
        let n = s.len() as f64;
        let mean = s.iter().fold(Vec3::zeros(), |a, (p, _)| a + p) / n;
        let spread = (s.iter().map(|(p, _)| (p - mean).xy().norm_squared()).sum::<f64>() / n).sqrt();
        if spread > CALIBRATION_MAX_SPREAD {
            return Err(VisionError::CalibrationQuality { tag: id, spread });
        }
        let (sy, cy) = s.iter().fold((0.0, 0.0), |(a, b), (_, y)| (a + y.sin(), b + y.cos()));
        // Planarity: the z component is dropped.
        tags.push(TagSpec { id, size, x: mean.x, y: mean.y, yaw: wrap_angle(sy.atan2(cy)) });
    }
    TagBundleSpec::new(tags)
}
