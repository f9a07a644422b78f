//! Landing-target perception: tag bundle layout and calibration, camera pose
//! from tag corners, and the recursive pad-pose smoother.

mod bundle;
mod calib;
mod pnp;
mod rls;

pub use bundle::{TagBundleSpec, TagSpec};
pub use calib::{calibrate_bundle, CALIBRATION_MAX_SPREAD};
pub use pnp::{estimate_camera_pose, homography_pose, reprojection_cost, CameraPoseEstimate, LM_MAX_ITERATIONS};
pub use rls::{
    bundle_height, pad_pose_measurement, rls_initialize, rls_update, PadMeasurement, RlsPadEstimate,
    DEFAULT_FORGETTING, DEFAULT_K_MIN,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VisionError {
    #[error("invalid tag bundle: {0}")]
    InvalidBundle(String),
    #[error("bundle file line {line}: {message}")]
    BundleParse { line: usize, message: String },
    #[error("bundle file i/o: {0}")]
    Io(String),
    #[error("no known tags detected")]
    NoDetection,
    #[error("pose estimation failed: {0}")]
    EstimationFailed(String),
    #[error("need at least {need} frames, got {got}")]
    InsufficientFrames { got: usize, need: usize },
    #[error("master tag missing from frame {frame}")]
    MasterTagMissing { frame: usize },
    #[error("tag {tag} calibration spread {spread:.4} m exceeds limit")]
    CalibrationQuality { tag: u32, spread: f64 },
    #[error("only {got} pad detections, need {need}")]
    DetectionTimeout { got: usize, need: usize },
}
