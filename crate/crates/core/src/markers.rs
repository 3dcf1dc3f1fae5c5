//! Retroreflective marker patterns and libraries.
//!
//! A marker is an N x N grid of circular retroreflective patches with
//! `spacing` meters between neighboring cells. The four grid corners are
//! always occupied and the top-right corner carries a larger patch (the
//! anchor) that breaks rotational symmetry. The remaining `N^2 - 4` cells
//! encode the marker id: interior cell `j` (row-major, top-left first) is
//! occupied iff bit `j` of `id_bits` is set.
//!
//! Marker frame: origin at the grid center, +X right, +Y up, +Z out of the
//! plane toward the viewer. Row 0 is the top row, so cell (row, col) sits at
//! `x = (col - (N-1)/2) * spacing`, `y = ((N-1)/2 - row) * spacing`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::Glint;
use crate::geometry::{project, CameraModel, PlanarPose};
use crate::matching::{canonical_image_order, match_library, MatchConfig};

/// Patch diameters for the long-range variant (16 mm corners, 30 mm anchor).
pub const LONG_RANGE_DIAMETERS: (f64, f64) = (0.016, 0.030);
/// Patch diameters for the short-range variant (12 mm corners, 20 mm anchor).
pub const SHORT_RANGE_DIAMETERS: (f64, f64) = (0.012, 0.020);

#[derive(Debug, Error)]
pub enum MarkerError {
    #[error("id_bits {bits} does not fit in {capacity} interior cells")]
    BitOverflow { bits: u32, capacity: u32 },
    #[error("invalid marker geometry: {0}")]
    InvalidGeometry(String),
    #[error("malformed pattern: {0}")]
    MalformedPattern(String),
    #[error("invalid marker library: {0}")]
    BadLibrary(String),
}

/// One circular retroreflective patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    /// Center in marker coordinates, meters.
    pub x: f64,
    pub y: f64,
    /// Physical diameter, meters.
    pub diameter: f64,
    pub is_anchor: bool,
}

/// A complete marker: anchored corner frame plus id-encoding interior dots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerPattern {
    pub marker_id: u32,
    pub id_bits: u32,
    pub grid_n: u32,
    /// Cell-to-cell spacing, meters.
    pub spacing: f64,
    /// Corner-to-corner extent, `(grid_n - 1) * spacing`.
    pub span: f64,
    /// Patches in row-major grid order (top-left first).
    pub patches: Vec<Patch>,
}

/// A family of patterns sharing one grid geometry. The JSON form of this
/// struct is the contract between the simulator, the matcher and the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkerLibrary {
    pub grid_n: u32,
    pub spacing: f64,
    pub corner_diameter: f64,
    pub anchor_diameter: f64,
    pub patterns: Vec<MarkerPattern>,
}

/// Position of grid cell (row, col) in marker coordinates.
fn cell_position(grid_n: u32, row: u32, col: u32, spacing: f64) -> (f64, f64) {
    let half = (grid_n - 1) as f64 / 2.0;
    (
        (col as f64 - half) * spacing,
        (half - row as f64) * spacing,
    )
}

fn is_corner(grid_n: u32, row: u32, col: u32) -> bool {
    (row == 0 || row == grid_n - 1) && (col == 0 || col == grid_n - 1)
}

/// Builds the pattern for one id.
///
/// `grid_n >= 3`; the anchor must be strictly larger than the corner patches
/// so it stays the brightest glint after the diameter-squared intensity
/// falloff.
pub fn encode_marker(
    grid_n: u32,
    spacing: f64,
    id_bits: u32,
    corner_diameter: f64,
    anchor_diameter: f64,
) -> Result<MarkerPattern, MarkerError> {
    if grid_n < 3 {
        return Err(MarkerError::InvalidGeometry(format!(
            "grid_n must be >= 3, got {grid_n}"
        )));
    }
    if !(spacing > 0.0) || !(corner_diameter > 0.0) {
        return Err(MarkerError::InvalidGeometry(
            "spacing and diameters must be positive".into(),
        ));
    }
    if anchor_diameter <= corner_diameter {
        return Err(MarkerError::InvalidGeometry(format!(
            "anchor diameter {anchor_diameter} must exceed corner diameter {corner_diameter}"
        )));
    }
    let capacity = grid_n * grid_n - 4;
    if capacity > 32 {
        return Err(MarkerError::InvalidGeometry(format!(
            "{capacity} interior cells exceed the 32-bit id space"
        )));
    }
    if capacity < 32 && u64::from(id_bits) >= (1u64 << capacity) {
        return Err(MarkerError::BitOverflow {
            bits: id_bits,
            capacity,
        });
    }

    let mut patches = Vec::new();
    let mut bit = 0u32;
    for row in 0..grid_n {
        for col in 0..grid_n {
            let (x, y) = cell_position(grid_n, row, col, spacing);
            if is_corner(grid_n, row, col) {
                let anchor = row == 0 && col == grid_n - 1;
                patches.push(Patch {
                    x,
                    y,
                    diameter: if anchor { anchor_diameter } else { corner_diameter },
                    is_anchor: anchor,
                });
            } else {
                if (id_bits >> bit) & 1 == 1 {
                    patches.push(Patch {
                        x,
                        y,
                        diameter: corner_diameter,
                        is_anchor: false,
                    });
                }
                bit += 1;
            }
        }
    }

    Ok(MarkerPattern {
        marker_id: id_bits,
        id_bits,
        grid_n,
        spacing,
        span: (grid_n - 1) as f64 * spacing,
        patches,
    })
}

/// Recovers `id_bits` from patch positions alone (geometry, not metadata).
pub fn decode_id(pattern: &MarkerPattern) -> Result<u32, MarkerError> {
    let n = pattern.grid_n;
    if n < 3 || pattern.patches.is_empty() {
        return Err(MarkerError::MalformedPattern("empty pattern".into()));
    }
    let tol = pattern.spacing * 0.25;
    let occupied = |row: u32, col: u32| -> Result<bool, MarkerError> {
        let (x, y) = cell_position(n, row, col, pattern.spacing);
        let mut hits = 0;
        for p in &pattern.patches {
            if (p.x - x).abs() < tol && (p.y - y).abs() < tol {
                hits += 1;
            }
        }
        if hits > 1 {
            return Err(MarkerError::MalformedPattern(format!(
                "cell ({row},{col}) holds {hits} patches"
            )));
        }
        Ok(hits == 1)
    };

    // All four corners must be present; exactly one anchor at top-right.
    for (row, col) in [(0, 0), (0, n - 1), (n - 1, 0), (n - 1, n - 1)] {
        if !occupied(row, col)? {
            return Err(MarkerError::MalformedPattern(format!(
                "missing corner patch at ({row},{col})"
            )));
        }
    }
    let anchors: Vec<&Patch> = pattern.patches.iter().filter(|p| p.is_anchor).collect();
    let (ax, ay) = cell_position(n, 0, n - 1, pattern.spacing);
    match anchors.as_slice() {
        [a] if (a.x - ax).abs() < tol && (a.y - ay).abs() < tol => {}
        [_] => {
            return Err(MarkerError::MalformedPattern(
                "anchor is not at the top-right corner".into(),
            ))
        }
        _ => {
            return Err(MarkerError::MalformedPattern(format!(
                "expected exactly one anchor, found {}",
                anchors.len()
            )))
        }
    }

    // Every patch must land on a grid cell.
    let expected: usize = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .filter_map(|(r, c)| occupied(r, c).ok().map(|o| usize::from(o)))
        .sum();
    if expected != pattern.patches.len() {
        return Err(MarkerError::MalformedPattern(
            "patch positions do not lie on the grid".into(),
        ));
    }

    let mut bits = 0u32;
    let mut bit = 0u32;
    for row in 0..n {
        for col in 0..n {
            if is_corner(n, row, col) {
                continue;
            }
            if occupied(row, col)? {
                bits |= 1 << bit;
            }
            bit += 1;
        }
    }
    Ok(bits)
}

/// Generates all `2^(N^2-4)` patterns for one grid geometry.
pub fn generate_library(
    grid_n: u32,
    spacing: f64,
    corner_diameter: f64,
    anchor_diameter: f64,
) -> Result<MarkerLibrary, MarkerError> {
    let capacity = grid_n
        .checked_mul(grid_n)
        .map(|c| c - 4)
        .filter(|&c| c <= 20)
        .ok_or_else(|| {
            MarkerError::InvalidGeometry(format!(
                "refusing to enumerate a library for grid_n = {grid_n}"
            ))
        })?;
    let count = 1u32 << capacity;
    let patterns = (0..count)
        .map(|bits| encode_marker(grid_n, spacing, bits, corner_diameter, anchor_diameter))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MarkerLibrary {
        grid_n,
        spacing,
        corner_diameter,
        anchor_diameter,
        patterns,
    })
}

impl MarkerLibrary {
    /// Parses a library and checks that every pattern decodes to its id.
    pub fn from_json(text: &str) -> Result<Self, MarkerError> {
        let lib: MarkerLibrary =
            serde_json::from_str(text).map_err(|e| MarkerError::BadLibrary(e.to_string()))?;
        if lib.patterns.is_empty() {
            return Err(MarkerError::BadLibrary("library has no patterns".into()));
        }
        for p in &lib.patterns {
            let decoded = decode_id(p)
                .map_err(|e| MarkerError::BadLibrary(format!("pattern {}: {e}", p.marker_id)))?;
            if decoded != p.id_bits || p.marker_id != p.id_bits {
                return Err(MarkerError::BadLibrary(format!(
                    "pattern {} decodes to {decoded}",
                    p.marker_id
                )));
            }
        }
        Ok(lib)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("library serializes")
    }

    pub fn get(&self, marker_id: u32) -> Option<&MarkerPattern> {
        self.patterns.iter().find(|p| p.marker_id == marker_id)
    }
}

/// Sort key for a clockwise sweep that starts at the anchor direction:
/// angle measured clockwise (decreasing mathematical angle) from
/// `anchor_angle`, in [0, 2*pi).
pub(crate) fn clockwise_key(anchor_angle: f64, angle: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let k = (anchor_angle - angle) % tau;
    if k < 0.0 {
        k + tau
    } else {
        k
    }
}

/// Canonical traversal of a pattern's patch centers.
///
/// Anchor first, then the remaining corners in clockwise order as seen from
/// the camera side (+Z), then interior patches by clockwise angle about the
/// centroid of all patches. Angle ties are broken by ascending radius, then
/// by row-major patch index. The image-side ordering in
/// [`crate::matching::canonical_image_order`] applies the same sweep, so for
/// a correctly matched marker the two sequences correspond element-wise.
pub fn canonical_object_order(pattern: &MarkerPattern) -> Vec<(f64, f64)> {
    let pts: Vec<(f64, f64)> = pattern.patches.iter().map(|p| (p.x, p.y)).collect();
    let anchor_idx = pattern
        .patches
        .iter()
        .position(|p| p.is_anchor)
        .expect("pattern has an anchor");

    // Corners = hull extremes of the patch set; for a valid pattern these are
    // exactly the four grid corners.
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let centroid = (sx / n, sy / n);
    let radius = |p: (f64, f64)| ((p.0 - centroid.0).powi(2) + (p.1 - centroid.1).powi(2)).sqrt();
    let angle = |p: (f64, f64)| (p.1 - centroid.1).atan2(p.0 - centroid.0);
    let anchor_angle = angle(pts[anchor_idx]);

    let max_r = pts.iter().map(|&p| radius(p)).fold(0.0, f64::max);
    let is_corner_pt: Vec<bool> = pts
        .iter()
        .map(|&p| radius(p) > max_r - pattern.spacing * 0.25)
        .collect();

    let sweep = |indices: &mut Vec<usize>| {
        indices.sort_by(|&a, &b| {
            let ka = clockwise_key(anchor_angle, angle(pts[a]));
            let kb = clockwise_key(anchor_angle, angle(pts[b]));
            ka.partial_cmp(&kb)
                .unwrap()
                .then(radius(pts[a]).partial_cmp(&radius(pts[b])).unwrap())
                .then(a.cmp(&b))
        });
    };

    let mut corners: Vec<usize> = (0..pts.len())
        .filter(|&i| is_corner_pt[i] && i != anchor_idx)
        .collect();
    sweep(&mut corners);
    let mut interior: Vec<usize> = (0..pts.len())
        .filter(|&i| !is_corner_pt[i] && i != anchor_idx)
        .collect();
    sweep(&mut interior);

    let mut order = vec![pts[anchor_idx]];
    order.extend(corners.into_iter().map(|i| pts[i]));
    order.extend(interior.into_iter().map(|i| pts[i]));
    order
}

/// Renders a pattern as an SVG document: white circles on black at physical
/// scale, `px_per_mm` pixels per millimeter. The marker id rides along as
/// metadata.
pub fn export_svg(pattern: &MarkerPattern, px_per_mm: f64) -> String {
    let max_d_mm = pattern
        .patches
        .iter()
        .map(|p| p.diameter)
        .fold(0.0, f64::max)
        * 1000.0;
    let span_mm = pattern.span * 1000.0;
    let half_side_mm = span_mm / 2.0 + max_d_mm;
    let side_px = 2.0 * half_side_mm * px_per_mm;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{side_px:.2}\" height=\"{side_px:.2}\" \
         viewBox=\"0 0 {side_px:.2} {side_px:.2}\" data-marker-id=\"{}\">\n",
        pattern.marker_id
    ));
    svg.push_str(&format!(
        "  <metadata>marker_id={} id_bits={:#b} grid_n={} spacing_mm={}</metadata>\n",
        pattern.marker_id,
        pattern.id_bits,
        pattern.grid_n,
        pattern.spacing * 1000.0
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{side_px:.2}\" height=\"{side_px:.2}\" fill=\"black\"/>\n"
    ));
    for p in &pattern.patches {
        // SVG y grows downward; marker +Y is up.
        let cx = (p.x * 1000.0 + half_side_mm) * px_per_mm;
        let cy = (half_side_mm - p.y * 1000.0) * px_per_mm;
        let r = p.diameter * 1000.0 / 2.0 * px_per_mm;
        svg.push_str(&format!(
            "  <circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"{r:.3}\" fill=\"white\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// One confused (true id, predicted id) pair from a distinguishability sweep.
#[derive(Debug, Clone, Serialize)]
pub struct Collision {
    pub true_id: u32,
    pub predicted_id: u32,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CollisionReport {
    pub trials: u64,
    pub unmatched: u64,
    pub collisions: Vec<Collision>,
}

impl CollisionReport {
    pub fn collision_count(&self) -> u64 {
        self.collisions.iter().map(|c| c.count).sum()
    }
}

/// Monte-Carlo confusability check over a whole library.
///
/// Every pattern is projected under every pose, glint centers are perturbed
/// with isotropic Gaussian noise of `sigma_px`, and the matcher runs against
/// the full library. Any accepted match with the wrong id is a collision.
/// Glint intensities are synthesized from patch diameters (retroreflective
/// return scales with area), so anchor identification is exercised too.
pub fn check_distinguishability(
    library: &MarkerLibrary,
    camera: &CameraModel,
    poses: &[PlanarPose],
    sigma_px: f64,
    config: &MatchConfig,
    seed: u64,
) -> CollisionReport {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma_px.max(f64::MIN_POSITIVE)).unwrap();

    let mut trials = 0;
    let mut unmatched = 0;
    let mut collisions: Vec<Collision> = Vec::new();

    for pattern in &library.patterns {
        for pose in poses {
            trials += 1;
            let mut glints = Vec::with_capacity(pattern.patches.len());
            let mut ok = true;
            for p in &pattern.patches {
                match project(camera, pose, (p.x, p.y)) {
                    Ok((u, v)) => {
                        let intensity =
                            200.0 * (p.diameter / library.anchor_diameter).powi(2);
                        glints.push(Glint::synthetic(
                            (u + noise.sample(&mut rng), v + noise.sample(&mut rng)),
                            intensity,
                        ));
                    }
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                unmatched += 1;
                continue;
            }
            let predicted = canonical_image_order(&glints)
                .ok()
                .and_then(|ordered| match_library(&ordered.glints, library, camera, config).ok());
            match predicted {
                Some(m) if m.marker_id == pattern.marker_id => {}
                Some(m) => {
                    if let Some(c) = collisions.iter_mut().find(|c| {
                        c.true_id == pattern.marker_id && c.predicted_id == m.marker_id
                    }) {
                        c.count += 1;
                    } else {
                        collisions.push(Collision {
                            true_id: pattern.marker_id,
                            predicted_id: m.marker_id,
                            count: 1,
                        });
                    }
                }
                None => unmatched += 1,
            }
        }
    }

    CollisionReport {
        trials,
        unmatched,
        collisions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_places_corners_and_interior_bits() {
        // 0b10110: interior cells 1, 2 and 4 occupied -> 4 corners + 3 dots.
        let p = encode_marker(3, 0.05, 0b10110, 0.016, 0.030).unwrap();
        assert_eq!(p.patches.len(), 7);
        assert!((p.span - 0.10).abs() < 1e-12);
        assert_eq!(p.patches.iter().filter(|p| p.is_anchor).count(), 1);
        let anchor = p.patches.iter().find(|p| p.is_anchor).unwrap();
        assert!((anchor.x - 0.05).abs() < 1e-12 && (anchor.y - 0.05).abs() < 1e-12);
        assert_eq!(anchor.diameter, 0.030);
    }

    #[test]
    fn four_by_four_has_twelve_interior_cells() {
        let p = encode_marker(4, 0.10, 0, 0.016, 0.030).unwrap();
        assert!((p.span - 0.30).abs() < 1e-12);
        assert_eq!(p.patches.len(), 4);
        let full = encode_marker(4, 0.10, 0xFFF, 0.016, 0.030).unwrap();
        assert_eq!(full.patches.len(), 16);
        assert!(encode_marker(4, 0.10, 0x1000, 0.016, 0.030).is_err());
    }

    #[test]
    fn id_bits_overflow_is_rejected() {
        assert!(matches!(
            encode_marker(3, 0.05, 32, 0.016, 0.030),
            Err(MarkerError::BitOverflow { capacity: 5, .. })
        ));
    }

    #[test]
    fn anchor_must_exceed_corner_diameter() {
        assert!(matches!(
            encode_marker(3, 0.05, 0, 0.016, 0.016),
            Err(MarkerError::InvalidGeometry(_))
        ));
    }

    #[test]
    fn decode_recovers_id() {
        for bits in [0u32, 1, 5, 21, 31] {
            let p = encode_marker(3, 0.05, bits, 0.016, 0.030).unwrap();
            assert_eq!(decode_id(&p).unwrap(), bits);
        }
    }

    #[test]
    fn decode_rejects_missing_corner() {
        let mut p = encode_marker(3, 0.05, 5, 0.016, 0.030).unwrap();
        p.patches.retain(|q| !(q.x < -0.04 && q.y > 0.04)); // drop top-left
        assert!(matches!(
            decode_id(&p),
            Err(MarkerError::MalformedPattern(_))
        ));
    }

    #[test]
    fn decode_rejects_off_grid_patch() {
        let mut p = encode_marker(3, 0.05, 0, 0.016, 0.030).unwrap();
        p.patches.push(Patch {
            x: 0.024,
            y: 0.013,
            diameter: 0.016,
            is_anchor: false,
        });
        assert!(decode_id(&p).is_err());
    }

    #[test]
    fn default_library_has_32_unique_patterns() {
        let lib = generate_library(3, 0.05, 0.016, 0.030).unwrap();
        assert_eq!(lib.patterns.len(), 32);
        let mut ids: Vec<u32> = lib.patterns.iter().map(|p| p.marker_id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 32);
    }

    #[test]
    fn library_json_round_trip() {
        let lib = generate_library(3, 0.05, 0.016, 0.030).unwrap();
        let parsed = MarkerLibrary::from_json(&lib.to_json()).unwrap();
        assert_eq!(parsed.patterns.len(), 32);
        assert_eq!(parsed.patterns[7], lib.patterns[7]);
    }

    #[test]
    fn library_json_rejects_inconsistent_ids() {
        let mut lib = generate_library(3, 0.05, 0.016, 0.030).unwrap();
        lib.patterns[3].marker_id = 9;
        assert!(MarkerLibrary::from_json(&lib.to_json()).is_err());
    }

    #[test]
    fn corners_order_clockwise_from_anchor() {
        let p = encode_marker(3, 0.05, 0, 0.016, 0.030).unwrap();
        let order = canonical_object_order(&p);
        let s = 0.05;
        let expect = [(s, s), (s, -s), (-s, -s), (-s, s)];
        assert_eq!(order.len(), 4);
        for (got, want) in order.iter().zip(expect) {
            assert!((got.0 - want.0).abs() < 1e-12 && (got.1 - want.1).abs() < 1e-12);
        }
    }

    #[test]
    fn center_only_interior_comes_after_corners() {
        // Bit 2 is the center cell of a 3x3 grid.
        let p = encode_marker(3, 0.05, 0b00100, 0.016, 0.030).unwrap();
        let order = canonical_object_order(&p);
        assert_eq!(order.len(), 5);
        assert!((order[4].0).abs() < 1e-12 && (order[4].1).abs() < 1e-12);
    }

    #[test]
    fn full_grid_order_is_deterministic_with_radius_tiebreak() {
        let p = encode_marker(3, 1.0, 31, 0.016, 0.030).unwrap();
        let order = canonical_object_order(&p);
        let expect = [
            (1.0, 1.0),
            (1.0, -1.0),
            (-1.0, -1.0),
            (-1.0, 1.0),
            (0.0, 0.0), // center ties with (1,0) on angle, wins on radius
            (1.0, 0.0),
            (0.0, -1.0),
            (-1.0, 0.0),
            (0.0, 1.0),
        ];
        for (i, (got, want)) in order.iter().zip(expect).enumerate() {
            assert!(
                (got.0 - want.0).abs() < 1e-12 && (got.1 - want.1).abs() < 1e-12,
                "position {i}: got {got:?}, want {want:?}"
            );
        }
    }

    #[test]
    fn canonical_order_is_rotation_equivariant() {
        let p = encode_marker(3, 0.05, 0b01101, 0.016, 0.030).unwrap();
        let base = canonical_object_order(&p);
        for deg in [30.0f64, 90.0, 147.0, 301.0] {
            let (s, c) = deg.to_radians().sin_cos();
            let mut rotated = p.clone();
            for q in &mut rotated.patches {
                let (x, y) = (q.x, q.y);
                q.x = c * x - s * y;
                q.y = s * x + c * y;
            }
            let order = canonical_object_order(&rotated);
            for (got, want) in order.iter().zip(&base) {
                let wx = c * want.0 - s * want.1;
                let wy = s * want.0 + c * want.1;
                assert!(
                    (got.0 - wx).abs() < 1e-9 && (got.1 - wy).abs() < 1e-9,
                    "rotation {deg}: sequence changed"
                );
            }
        }
    }

    #[test]
    fn svg_circles_reflect_physical_scale() {
        let p = encode_marker(3, 0.05, 0, 0.016, 0.030).unwrap();
        let svg = export_svg(&p, 2.0); // 2 px per mm
        assert!(svg.contains("data-marker-id=\"0\""));
        assert_eq!(svg.matches("<circle").count(), 4);
        // 30 mm anchor at 2 px/mm -> r = 30 px.
        assert!(svg.contains("r=\"30.000\""));
        // 16 mm corners -> r = 16 px.
        assert!(svg.contains("r=\"16.000\""));
        assert!(svg.contains("fill=\"black\""));
    }

    #[test]
    fn svg_positions_parse_back_to_the_grid() {
        let p = encode_marker(3, 0.05, 0, 0.016, 0.030).unwrap();
        let px_per_mm = 4.0;
        let svg = export_svg(&p, px_per_mm);
        let mut centers = Vec::new();
        for part in svg.split("<circle").skip(1) {
            let grab = |key: &str| -> f64 {
                let start = part.find(key).unwrap() + key.len();
                let rest = &part[start..];
                rest[..rest.find('"').unwrap()].parse().unwrap()
            };
            centers.push((grab("cx=\""), grab("cy=\"")));
        }
        // Anchor (top-right in marker frame) renders right of center and
        // above it in SVG coordinates (smaller y).
        let side = 2.0 * (50.0 + 30.0) * px_per_mm / 2.0;
        let anchor = centers
            .iter()
            .find(|c| c.0 > side && c.1 < side)
            .expect("anchor circle present");
        assert!((anchor.0 - (50.0 + 80.0) * px_per_mm / 2.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(bits in 0u32..32) {
            let p = encode_marker(3, 0.05, bits, 0.016, 0.030).unwrap();
            prop_assert_eq!(decode_id(&p).unwrap(), bits);
            prop_assert_eq!(p.patches.len(), 4 + bits.count_ones() as usize);
        }

        #[test]
        fn encode_decode_round_trip_4x4(bits in 0u32..4096) {
            let p = encode_marker(4, 0.10, bits, 0.016, 0.030).unwrap();
            prop_assert_eq!(decode_id(&p).unwrap(), bits);
        }

        #[test]
        fn canonical_order_covers_all_patches(bits in 0u32..32) {
            let p = encode_marker(3, 0.05, bits, 0.016, 0.030).unwrap();
            let order = canonical_object_order(&p);
            prop_assert_eq!(order.len(), p.patches.len());
            // Every patch appears exactly once.
            for patch in &p.patches {
                let hits = order
                    .iter()
                    .filter(|o| (o.0 - patch.x).abs() < 1e-12 && (o.1 - patch.y).abs() < 1e-12)
                    .count();
                prop_assert_eq!(hits, 1);
            }
            // Anchor leads.
            let anchor = p.patches.iter().find(|q| q.is_anchor).unwrap();
            prop_assert!((order[0].0 - anchor.x).abs() < 1e-12);
        }
    }
}
