//! Camera model, rotation conventions and planar pose estimation.
//!
//! Conventions used everywhere in this crate:
//!
//! * Camera frame: +X right, +Y down, +Z along the optical axis into the
//!   scene. Pixel coordinates follow the same X/Y directions.
//! * Marker frame: the marker plane is Z = 0, origin at the grid center.
//!   A pose `(R, t)` maps marker coordinates into the camera frame,
//!   `p_cam = R * (X, Y, 0) + t`.
//! * Euler decomposition: `R = Ry(yaw) * Rx(pitch) * Rz(roll)`, angles in
//!   degrees. Yaw is about the marker's vertical axis, pitch about its
//!   horizontal axis, roll about the plane normal. The fronto-parallel
//!   marker is the identity rotation.

mod camera;
mod hull;
mod pnp;
mod pose;

pub use camera::CameraModel;
pub use hull::{convex_hull_indices, polygon_area};
pub use pnp::{reprojection_rmse, solve_planar_pnp, PlanarCorrespondence};
pub use pose::{euler_to_rotation, rotation_to_euler, EulerAngles, PlanarPose};

use thiserror::Error;

/// Errors from projection and pose estimation.
#[derive(Debug, Error)]
pub enum GeometryError {
    /// Point lies on or behind the camera plane.
    #[error("point has non-positive depth in the camera frame (z = {z:.3e})")]
    NonPositiveDepth { z: f64 },
    /// Camera intrinsics failed validation.
    #[error("invalid camera model: {0}")]
    BadCamera(String),
    /// Correspondence cannot support a pose (too few points, collinear, ...).
    #[error("degenerate correspondence: {0}")]
    DegenerateGeometry(String),
    /// A decomposition did not converge or produced a singular system.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

/// Projects a marker-plane point through a pose into pixel coordinates.
///
/// Applies the rigid transform, perspective division, radial distortion and
/// the intrinsics, in that order. Fails if the transformed point has depth
/// below 1e-9 m.
pub fn project(
    camera: &CameraModel,
    pose: &PlanarPose,
    object: (f64, f64),
) -> Result<(f64, f64), GeometryError> {
    let p = pose.rotation * nalgebra::Vector3::new(object.0, object.1, 0.0) + pose.translation;
    if p.z <= 1e-9 {
        return Err(GeometryError::NonPositiveDepth { z: p.z });
    }
    let n = (p.x / p.z, p.y / p.z);
    Ok(camera.px_from_normalized(camera.distort_normalized(n)))
}
