use nalgebra::{Matrix3, Vector3};

/// Euler angles in degrees for the `Ry(yaw) * Rx(pitch) * Rz(roll)` factoring.
///
/// `yaw` and `roll` live in (-180, 180], `pitch` in [-90, 90]. Within 0.1
/// degree of the pitch poles the factoring degenerates; values are still
/// returned but `gimbal_lock` is set and roll/yaw are no longer independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub gimbal_lock: bool,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        EulerAngles {
            roll,
            pitch,
            yaw,
            gimbal_lock: false,
        }
    }
}

/// Wraps an angle in degrees into (-180, 180].
fn wrap_half_open(deg: f64) -> f64 {
    let mut a = deg % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// Composes `Ry(yaw) * Rx(pitch) * Rz(roll)` from angles in degrees.
pub fn euler_to_rotation(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    let (sr, cr) = roll.to_radians().sin_cos();
    let (sp, cp) = pitch.to_radians().sin_cos();
    let (sy, cy) = yaw.to_radians().sin_cos();
    let rz = Matrix3::new(cr, -sr, 0.0, sr, cr, 0.0, 0.0, 0.0, 1.0);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cp, -sp, 0.0, sp, cp);
    let ry = Matrix3::new(cy, 0.0, sy, 0.0, 1.0, 0.0, -sy, 0.0, cy);
    ry * rx * rz
}

/// Factors a rotation into yaw/pitch/roll under this crate's convention.
///
/// In closed form: `pitch = asin(-R12)`, `yaw = atan2(R02, R22)`,
/// `roll = atan2(R10, R11)`. Near the pitch poles roll is pinned to zero and
/// the remaining freedom is folded into yaw.
pub fn rotation_to_euler(r: &Matrix3<f64>) -> EulerAngles {
    let sp = (-r[(1, 2)]).clamp(-1.0, 1.0);
    let pitch = sp.asin().to_degrees();
    let cp = (1.0 - sp * sp).sqrt();

    let (roll, yaw) = if cp > 1e-9 {
        (
            r[(1, 0)].atan2(r[(1, 1)]).to_degrees(),
            r[(0, 2)].atan2(r[(2, 2)]).to_degrees(),
        )
    } else if sp > 0.0 {
        // pitch = +90: only yaw - roll is observable.
        (0.0, r[(0, 1)].atan2(r[(0, 0)]).to_degrees())
    } else {
        // pitch = -90: only yaw + roll is observable.
        (0.0, (-r[(0, 1)]).atan2(r[(0, 0)]).to_degrees())
    };

    EulerAngles {
        roll: wrap_half_open(roll),
        pitch,
        yaw: wrap_half_open(yaw),
        gimbal_lock: pitch.abs() > 89.9,
    }
}

/// A planar pose: marker frame -> camera frame.
#[derive(Debug, Clone)]
pub struct PlanarPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    /// Euler factoring of `rotation`, kept in sync by the constructors.
    pub euler: EulerAngles,
    /// `||translation||`, the uncalibrated distance estimate in meters.
    pub distance_proxy: f64,
    /// Pixel reprojection RMSE against the correspondence that produced this
    /// pose. Zero for poses built directly from parameters.
    pub rmse: f64,
}

impl PlanarPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        PlanarPose {
            rotation,
            translation,
            euler: rotation_to_euler(&rotation),
            distance_proxy: translation.norm(),
            rmse: 0.0,
        }
    }

    /// Builds a pose from Euler angles in degrees.
    pub fn from_euler_deg(roll: f64, pitch: f64, yaw: f64, translation: Vector3<f64>) -> Self {
        PlanarPose::new(euler_to_rotation(roll, pitch, yaw), translation)
    }

    pub fn identity_at(translation: Vector3<f64>) -> Self {
        PlanarPose::new(Matrix3::identity(), translation)
    }
}
