use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{DetectError, GrayFrame, Roi};

#[derive(Debug, Clone)]
pub struct PupilConfig {
    /// Reject dark components smaller than this (pixels).
    pub min_area: usize,
    /// Boundary pixels within this distance of the fitted ellipse count as
    /// inliers for the confidence score.
    pub inlier_tol_px: f64,
    /// ROI half-extent as a multiple of the pupil major axis.
    pub roi_scale: f64,
}

impl Default for PupilConfig {
    fn default() -> Self {
        PupilConfig {
            min_area: 150,
            inlier_tol_px: 1.5,
            roi_scale: 2.2,
        }
    }
}

/// Pupil center and elliptical outline in pixel coordinates.
///
/// `confidence` is the inlier fraction of boundary pixels against the fitted
/// ellipse; occlusion (eyelid cutting the outline) drives it down, which is
/// what blink gating keys on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PupilObservation {
    pub center: (f64, f64),
    /// Semi-major axis, px.
    pub major: f64,
    /// Semi-minor axis, px.
    pub minor: f64,
    /// Major-axis direction vs +x, degrees in (-90, 90].
    pub angle_deg: f64,
    pub confidence: f64,
}

/// The glint search region: a square of half-extent `roi_scale * major`
/// around the pupil center.
pub fn pupil_roi(pupil: &PupilObservation, cfg: &PupilConfig, frame: &GrayFrame) -> Roi {
    Roi::around(
        pupil.center,
        (cfg.roi_scale * 2.0 * pupil.major).max(40.0),
        frame.width,
        frame.height,
    )
}

/// Finds the pupil as the largest dark component and fits an ellipse to its
/// boundary.
///
/// The threshold adapts to the frame: dark pixels are those below
/// `p2 + 0.25 * (p50 - p2)` of the intensity histogram. A frame without dark
/// structure (uniform or all-bright) yields `NoPupilFound`.
pub fn localize_pupil(
    frame: &GrayFrame,
    cfg: &PupilConfig,
) -> Result<PupilObservation, DetectError> {
    let threshold = adaptive_threshold(frame).ok_or(DetectError::NoPupilFound)?;

    let component = largest_dark_component(frame, threshold);
    if component.len() < cfg.min_area {
        return Err(DetectError::NoPupilFound);
    }

    let boundary = boundary_pixels(frame, threshold, &component);
    let pts: Vec<(f64, f64)> = boundary
        .iter()
        .map(|&(x, y)| (x as f64, y as f64))
        .collect();
    let conic = fit_ellipse_direct(&pts).ok_or(DetectError::NoPupilFound)?;
    let geo = conic.geometry().ok_or(DetectError::NoPupilFound)?;

    let inliers = pts
        .iter()
        .filter(|&&p| conic.sampson_distance(p) <= cfg.inlier_tol_px)
        .count();
    let confidence = inliers as f64 / pts.len().max(1) as f64;

    Ok(PupilObservation {
        center: geo.center,
        major: geo.major,
        minor: geo.minor,
        angle_deg: geo.angle_deg,
        confidence,
    })
}

/// Histogram-based dark threshold; `None` when the frame has no dark tail.
fn adaptive_threshold(frame: &GrayFrame) -> Option<u8> {
    let mut hist = [0u32; 256];
    for &p in &frame.pixels {
        hist[p as usize] += 1;
    }
    let total = frame.pixels.len() as u32;
    let percentile = |q: f64| -> u8 {
        let target = (q * total as f64) as u32;
        let mut acc = 0;
        for (v, &count) in hist.iter().enumerate() {
            acc += count;
            if acc > target {
                return v as u8;
            }
        }
        255
    };
    let p2 = percentile(0.02) as f64;
    let p50 = percentile(0.50) as f64;
    if p50 - p2 < 15.0 {
        return None;
    }
    Some((p2 + 0.25 * (p50 - p2)) as u8)
}

/// BFS flood fill over `pixel < threshold`, returning the largest
/// 4-connected component.
fn largest_dark_component(frame: &GrayFrame, threshold: u8) -> Vec<(u32, u32)> {
    let (w, h) = (frame.width as usize, frame.height as usize);
    let mut visited = vec![false; w * h];
    let mut best: Vec<(u32, u32)> = Vec::new();
    let mut queue: Vec<(u32, u32)> = Vec::new();

    for start in 0..w * h {
        if visited[start] || frame.pixels[start] >= threshold {
            continue;
        }
        let mut component = Vec::new();
        queue.clear();
        queue.push(((start % w) as u32, (start / w) as u32));
        visited[start] = true;
        while let Some((x, y)) = queue.pop() {
            component.push((x, y));
            let mut try_push = |nx: i64, ny: i64| {
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    return;
                }
                let idx = ny as usize * w + nx as usize;
                if !visited[idx] && frame.pixels[idx] < threshold {
                    visited[idx] = true;
                    queue.push((nx as u32, ny as u32));
                }
            };
            try_push(x as i64 + 1, y as i64);
            try_push(x as i64 - 1, y as i64);
            try_push(x as i64, y as i64 + 1);
            try_push(x as i64, y as i64 - 1);
        }
        if component.len() > best.len() {
            best = component;
        }
    }
    best
}

/// Component pixels with at least one 4-neighbor outside the dark mask.
fn boundary_pixels(frame: &GrayFrame, threshold: u8, component: &[(u32, u32)]) -> Vec<(u32, u32)> {
    let is_dark = |x: i64, y: i64| -> bool {
        if x < 0 || y < 0 || x >= frame.width as i64 || y >= frame.height as i64 {
            return false;
        }
        frame.get(x as u32, y as u32) < threshold
    };
    component
        .iter()
        .copied()
        .filter(|&(x, y)| {
            let (x, y) = (x as i64, y as i64);
            !(is_dark(x + 1, y) && is_dark(x - 1, y) && is_dark(x, y + 1) && is_dark(x, y - 1))
        })
        .collect()
}

/// Conic coefficients of `ax^2 + bxy + cy^2 + dx + ey + f = 0`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Conic {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    e: f64,
    f: f64,
    /// Points were shifted by this before fitting (conditioning).
    shift: (f64, f64),
}

pub(crate) struct EllipseGeometry {
    pub center: (f64, f64),
    pub major: f64,
    pub minor: f64,
    pub angle_deg: f64,
}

impl Conic {
    fn eval_shifted(&self, p: (f64, f64)) -> f64 {
        let (x, y) = (p.0 - self.shift.0, p.1 - self.shift.1);
        self.a * x * x + self.b * x * y + self.c * y * y + self.d * x + self.e * y + self.f
    }

    /// First-order (Sampson) point-to-conic distance in pixels.
    pub(crate) fn sampson_distance(&self, p: (f64, f64)) -> f64 {
        let (x, y) = (p.0 - self.shift.0, p.1 - self.shift.1);
        let g = self.eval_shifted(p);
        let gx = 2.0 * self.a * x + self.b * y + self.d;
        let gy = self.b * x + 2.0 * self.c * y + self.e;
        let grad = (gx * gx + gy * gy).sqrt();
        if grad < 1e-12 {
            f64::INFINITY
        } else {
            g.abs() / grad
        }
    }

    /// Center/axes/angle form; `None` if the conic is not a real ellipse.
    pub(crate) fn geometry(&self) -> Option<EllipseGeometry> {
        let m = Matrix2::new(self.a, self.b / 2.0, self.b / 2.0, self.c);
        let det = m.determinant();
        if det <= 0.0 {
            return None; // parabola or hyperbola
        }
        let center_shifted = m.try_inverse()? * Vector2::new(-self.d / 2.0, -self.e / 2.0);
        let (x0, y0) = (center_shifted.x, center_shifted.y);
        // Constant term after recentering the conic on its center.
        let f0 = self.a * x0 * x0
            + self.b * x0 * y0
            + self.c * y0 * y0
            + self.d * x0
            + self.e * y0
            + self.f;
        let eig = m.symmetric_eigen();
        let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
        let s0 = -f0 / l0;
        let s1 = -f0 / l1;
        if s0 <= 0.0 || s1 <= 0.0 {
            return None;
        }
        let (r0, r1) = (s0.sqrt(), s1.sqrt());
        // Major axis direction = eigenvector of the smaller eigenvalue.
        let (major, minor, axis) = if r0 >= r1 {
            (r0, r1, eig.eigenvectors.column(0).into_owned())
        } else {
            (r1, r0, eig.eigenvectors.column(1).into_owned())
        };
        let mut angle = axis.y.atan2(axis.x).to_degrees();
        if angle <= -90.0 {
            angle += 180.0;
        } else if angle > 90.0 {
            angle -= 180.0;
        }
        Some(EllipseGeometry {
            center: (x0 + self.shift.0, y0 + self.shift.1),
            major,
            minor,
            angle_deg: angle,
        })
    }
}

/// Direct least-squares ellipse fit (ellipse-specific constraint
/// `4ac - b^2 = 1`), in the numerically stable split formulation.
pub(crate) fn fit_ellipse_direct(points: &[(f64, f64)]) -> Option<Conic> {
    if points.len() < 6 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;

    // Scatter blocks over centered coordinates: D1 = [x^2 xy y^2],
    // D2 = [x y 1].
    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for &(px, py) in points {
        let (x, y) = (px - mx, py - my);
        let d1 = Vector3::new(x * x, x * y, y * y);
        let d2 = Vector3::new(x, y, 1.0);
        s1 += d1 * d1.transpose();
        s2 += d1 * d2.transpose();
        s3 += d2 * d2.transpose();
    }

    let s3_inv = s3.try_inverse()?;
    let t = -s3_inv * s2.transpose();
    let m = s1 + s2 * t;
    // Premultiply by C1^-1 for the constrained eigenproblem.
    let m = Matrix3::new(
        m[(2, 0)] / 2.0,
        m[(2, 1)] / 2.0,
        m[(2, 2)] / 2.0,
        -m[(1, 0)],
        -m[(1, 1)],
        -m[(1, 2)],
        m[(0, 0)] / 2.0,
        m[(0, 1)] / 2.0,
        m[(0, 2)] / 2.0,
    );

    // The ellipse solution is the real eigenvector with 4ac - b^2 > 0.
    let abc = real_eigenvectors_3x3(&m)
        .into_iter()
        .find(|v| 4.0 * v.x * v.z - v.y * v.y > 0.0)?;
    let def = t * abc;

    Some(Conic {
        a: abc.x,
        b: abc.y,
        c: abc.z,
        d: def.x,
        e: def.y,
        f: def.z,
        shift: (mx, my),
    })
}

/// Real eigenvectors of a general 3x3 matrix via the characteristic cubic.
fn real_eigenvectors_3x3(m: &Matrix3<f64>) -> Vec<Vector3<f64>> {
    // det(M - t I) = -t^3 + c2 t^2 + c1 t + c0
    let c2 = m.trace();
    let c1 = -0.5 * (m.trace().powi(2) - (m * m).trace());
    let c0 = m.determinant();

    // Roots of t^3 - c2 t^2 - c1 t - c0 = 0.
    let roots = cubic_real_roots(1.0, -c2, -c1, -c0);
    let mut out = Vec::new();
    for lambda in roots {
        let a = m - Matrix3::identity() * lambda;
        // Null direction: the largest cross product of two rows.
        let r0 = Vector3::new(a[(0, 0)], a[(0, 1)], a[(0, 2)]);
        let r1 = Vector3::new(a[(1, 0)], a[(1, 1)], a[(1, 2)]);
        let r2 = Vector3::new(a[(2, 0)], a[(2, 1)], a[(2, 2)]);
        let candidates = [r0.cross(&r1), r0.cross(&r2), r1.cross(&r2)];
        let best = candidates
            .into_iter()
            .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
            .unwrap();
        if best.norm() > 1e-12 {
            out.push(best / best.norm());
        }
    }
    out
}

/// Real roots of `a t^3 + b t^2 + c t + d = 0` by the trigonometric method.
fn cubic_real_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (b, c, d) = (b / a, c / a, d / a);
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 1e-18 {
        // One real root.
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        vec![u + v + shift]
    } else {
        // Three real roots (possibly repeated).
        let r = (-p / 3.0).max(0.0).sqrt();
        if r < 1e-18 {
            return vec![shift];
        }
        let phi = ((3.0 * q) / (2.0 * p * r)).clamp(-1.0, 1.0).acos();
        (0..3)
            .map(|k| 2.0 * r * ((phi + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() + shift)
            .collect()
    }
}
