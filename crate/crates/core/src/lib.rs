//! Estimation, perception, guidance, control and mission autonomy for a
//! multirotor that flies repeated sorties from a charging pad.

pub mod camera;
pub mod geometry;
pub mod plant;
pub mod sensors;
pub mod vision;
pub mod estimator;
pub mod trajectory;
pub mod control;
pub mod autonomy;
pub mod scenario;

pub use autonomy::{AutonomyEvent, EventKind, MasterState, NavState};
pub use camera::{CameraModel, CameraPose};
pub use estimator::{ErrorCovariance, FilterConfig, FilterState, Measurement, MeasurementKind, MsfFilter};
pub use geometry::{Mat3, UnitQuat, Vec3};
pub use plant::{BatteryState, PadGeometry, TrueVehicleState, VehicleParams};
pub use scenario::{RunLog, ScenarioConfig, ScenarioError, World};
pub use sensors::{TagDetection, TagDetectionSet};
pub use trajectory::{FlatSample, PolyTrajectory, Waypoint};
pub use vision::{PadMeasurement, RlsPadEstimate, TagBundleSpec};
