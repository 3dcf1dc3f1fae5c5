use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Pinhole intrinsics with a two-term radial distortion model.
///
/// Distortion acts on normalized coordinates: `x' = x * (1 + k1*r^2 + k2*r^4)`
/// with `r^2 = x^2 + y^2`. Negative `k1` is barrel distortion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub k1: f64,
    #[serde(default)]
    pub k2: f64,
}

impl Default for CameraModel {
    /// The synthetic eye camera: 1080p, fx = fy = 1400 px, centered principal
    /// point, no distortion.
    fn default() -> Self {
        CameraModel {
            fx: 1400.0,
            fy: 1400.0,
            cx: 960.0,
            cy: 540.0,
            width: 1920,
            height: 1080,
            k1: 0.0,
            k2: 0.0,
        }
    }
}

impl CameraModel {
    /// Parses and validates a camera from its JSON form.
    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let cam: CameraModel =
            serde_json::from_str(text).map_err(|e| GeometryError::BadCamera(e.to_string()))?;
        cam.validate()?;
        Ok(cam)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("camera serializes")
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::BadCamera(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::BadCamera("zero image dimensions".into()));
        }
        for (name, v) in [
            ("cx", self.cx),
            ("cy", self.cy),
            ("k1", self.k1),
            ("k2", self.k2),
        ] {
            if !v.is_finite() {
                return Err(GeometryError::BadCamera(format!("{name} is not finite")));
            }
        }
        Ok(())
    }

    /// Normalized image coordinates of a pixel (distortion not removed).
    pub fn normalized_from_px(&self, px: (f64, f64)) -> (f64, f64) {
        ((px.0 - self.cx) / self.fx, (px.1 - self.cy) / self.fy)
    }

    pub fn px_from_normalized(&self, n: (f64, f64)) -> (f64, f64) {
        (self.fx * n.0 + self.cx, self.fy * n.1 + self.cy)
    }

    /// Applies radial distortion to ideal normalized coordinates.
    pub fn distort_normalized(&self, n: (f64, f64)) -> (f64, f64) {
        let r2 = n.0 * n.0 + n.1 * n.1;
        let f = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
        (n.0 * f, n.1 * f)
    }

    /// Inverts the radial model by fixed-point iteration.
    ///
    /// For the coefficient ranges this crate deals with (|k1| <= 0.3) the
    /// iteration contracts rapidly; 20 rounds leave the round-trip error far
    /// below 1e-6 px.
    pub fn undistort_normalized(&self, d: (f64, f64)) -> (f64, f64) {
        if self.k1 == 0.0 && self.k2 == 0.0 {
            return d;
        }
        let (mut x, mut y) = d;
        for _ in 0..20 {
            let r2 = x * x + y * y;
            let f = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
            x = d.0 / f;
            y = d.1 / f;
        }
        (x, y)
    }

    /// Distorts a pixel position (ideal pinhole pixel -> observed pixel).
    pub fn distort_px(&self, px: (f64, f64)) -> (f64, f64) {
        self.px_from_normalized(self.distort_normalized(self.normalized_from_px(px)))
    }

    /// Removes distortion from an observed pixel position.
    pub fn undistort_px(&self, px: (f64, f64)) -> (f64, f64) {
        self.px_from_normalized(self.undistort_normalized(self.normalized_from_px(px)))
    }

    pub fn contains(&self, px: (f64, f64)) -> bool {
        px.0 >= 0.0 && px.1 >= 0.0 && px.0 < self.width as f64 && px.1 < self.height as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_camera() -> CameraModel {
        CameraModel {
            fx: 1000.0,
            fy: 1000.0,
            cx: 500.0,
            cy: 500.0,
            width: 1000,
            height: 1000,
            k1: 0.0,
            k2: 0.0,
        }
    }

    #[test]
    fn json_round_trip_preserves_fields() {
        let cam = CameraModel {
            k1: -0.12,
            k2: 0.004,
            ..CameraModel::default()
        };
        let parsed = CameraModel::from_json(&cam.to_json()).unwrap();
        assert_eq!(cam, parsed);
    }

    #[test]
    fn json_distortion_defaults_to_zero() {
        let cam = CameraModel::from_json(
            r#"{"fx":1400,"fy":1400,"cx":960,"cy":540,"width":1920,"height":1080}"#,
        )
        .unwrap();
        assert_eq!(cam.k1, 0.0);
        assert_eq!(cam.k2, 0.0);
    }

    #[test]
    fn json_rejects_bad_focal_length() {
        let r = CameraModel::from_json(
            r#"{"fx":0,"fy":1400,"cx":960,"cy":540,"width":1920,"height":1080}"#,
        );
        assert!(matches!(r, Err(GeometryError::BadCamera(_))));
    }

    #[test]
    fn undistort_inverts_distort_within_1e6_px() {
        let cam = CameraModel {
            k1: -0.2,
            k2: 0.03,
            ..test_camera()
        };
        // Sample the full image area.
        for iu in 0..=10 {
            for iv in 0..=10 {
                let p = (iu as f64 * 100.0, iv as f64 * 100.0);
                let q = cam.undistort_px(cam.distort_px(p));
                assert!(
                    (q.0 - p.0).abs() < 1e-6 && (q.1 - p.1).abs() < 1e-6,
                    "round trip failed at {p:?}: got {q:?}"
                );
            }
        }
    }

    #[test]
    fn barrel_distortion_pulls_points_inward() {
        let cam = CameraModel {
            k1: -0.2,
            ..test_camera()
        };
        let (u, _) = cam.distort_px((550.0, 500.0));
        assert!(u < 550.0, "barrel distortion should pull u inward, got {u}");
    }
}
