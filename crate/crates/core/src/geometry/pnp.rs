use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};

use super::{convex_hull_indices, polygon_area, project, CameraModel, GeometryError, PlanarPose};

/// 2D-2D correspondences between marker-plane points (meters, Z = 0) and
/// observed pixel positions.
#[derive(Debug, Clone, Default)]
pub struct PlanarCorrespondence {
    pub object_points: Vec<(f64, f64)>,
    pub image_points: Vec<(f64, f64)>,
}

impl PlanarCorrespondence {
    pub fn new(object_points: Vec<(f64, f64)>, image_points: Vec<(f64, f64)>) -> Self {
        PlanarCorrespondence {
            object_points,
            image_points,
        }
    }

    pub fn len(&self) -> usize {
        self.object_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.object_points.is_empty()
    }

    fn validate(&self) -> Result<(), GeometryError> {
        if self.object_points.len() != self.image_points.len() {
            return Err(GeometryError::DegenerateGeometry(format!(
                "point count mismatch: {} object vs {} image",
                self.object_points.len(),
                self.image_points.len()
            )));
        }
        if self.object_points.len() < 4 {
            return Err(GeometryError::DegenerateGeometry(format!(
                "need at least 4 correspondences, got {}",
                self.object_points.len()
            )));
        }
        let hull: Vec<(f64, f64)> = convex_hull_indices(&self.object_points)
            .into_iter()
            .map(|i| self.object_points[i])
            .collect();
        if polygon_area(&hull) <= 1e-12 {
            return Err(GeometryError::DegenerateGeometry(
                "object points do not span a plane (hull area <= 1e-12 m^2)".into(),
            ));
        }
        Ok(())
    }
}

/// Pixel-space reprojection RMSE of a pose against a correspondence.
///
/// Returns infinity when any point fails to project (behind the camera), so
/// infeasible poses sort last.
pub fn reprojection_rmse(
    pose: &PlanarPose,
    corr: &PlanarCorrespondence,
    camera: &CameraModel,
) -> f64 {
    let mut acc = 0.0;
    for (obj, img) in corr.object_points.iter().zip(&corr.image_points) {
        match project(camera, pose, *obj) {
            Ok((u, v)) => {
                let (du, dv) = (u - img.0, v - img.1);
                acc += du * du + dv * dv;
            }
            Err(_) => return f64::INFINITY,
        }
    }
    (acc / corr.len() as f64).sqrt()
}

/// Solves the planar pose from >= 4 coplanar correspondences.
///
/// The homography from marker plane to normalized image coordinates is
/// estimated by DLT, then decomposed by matching its value and first-order
/// behavior at the object centroid. That construction yields exactly two
/// rotation candidates (the planar ambiguity); both are returned with their
/// translations, ordered by ascending reprojection RMSE. Near-ties fall back
/// to the smaller |pitch|.
pub fn solve_planar_pnp(
    corr: &PlanarCorrespondence,
    camera: &CameraModel,
) -> Result<(PlanarPose, PlanarPose), GeometryError> {
    corr.validate()?;
    camera.validate()?;

    // Work in the canonical object frame (centroid at origin): the
    // decomposition point must be interior to the observed points.
    let n = corr.len() as f64;
    let (cx, cy) = corr
        .object_points
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let centroid = (cx / n, cy / n);
    let centered: Vec<(f64, f64)> = corr
        .object_points
        .iter()
        .map(|p| (p.0 - centroid.0, p.1 - centroid.1))
        .collect();

    // Undistorted normalized image coordinates.
    let norm_img: Vec<(f64, f64)> = corr
        .image_points
        .iter()
        .map(|&p| camera.undistort_normalized(camera.normalized_from_px(p)))
        .collect();

    let mut h = homography_dlt(&centered, &norm_img)?;
    if h[(2, 2)].abs() < 1e-12 {
        return Err(GeometryError::NumericalFailure(
            "homography has vanishing scale".into(),
        ));
    }
    h /= h[(2, 2)];

    let (ra, rb) = rotations_from_homography(&h)?;

    let mut poses: Vec<PlanarPose> = [ra, rb]
        .into_iter()
        .map(|r| {
            let t_centered = translation_for_rotation(&r, &centered, &norm_img)?;
            // Undo the centroid shift: R*(p - c) + t == R*p + (t - R*c).
            let t = t_centered - r * Vector3::new(centroid.0, centroid.1, 0.0);
            let mut pose = PlanarPose::new(r, t);
            pose.rmse = reprojection_rmse(&pose, corr, camera);
            Ok(pose)
        })
        .collect::<Result<_, GeometryError>>()?;

    // Ascending RMSE; RMSE ties are decided by the flatter interpretation.
    let tie = (poses[0].rmse - poses[1].rmse).abs()
        <= 1e-9 * poses[0].rmse.max(poses[1].rmse).max(1.0);
    let swap = if tie {
        poses[1].euler.pitch.abs() < poses[0].euler.pitch.abs()
    } else {
        poses[1].rmse < poses[0].rmse
    };
    if swap {
        poses.swap(0, 1);
    }
    let second = poses.pop().expect("two poses");
    let first = poses.pop().expect("two poses");
    Ok((first, second))
}

/// Direct linear transform with Hartley normalization on both point sets.
fn homography_dlt(
    object: &[(f64, f64)],
    image: &[(f64, f64)],
) -> Result<Matrix3<f64>, GeometryError> {
    let t_obj = hartley_transform(object)?;
    let t_img = hartley_transform(image)?;
    let apply = |t: &Matrix3<f64>, p: (f64, f64)| -> (f64, f64) {
        (
            t[(0, 0)] * p.0 + t[(0, 2)],
            t[(1, 1)] * p.1 + t[(1, 2)],
        )
    };

    let n = object.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 9);
    for i in 0..n {
        let (x, y) = apply(&t_obj, object[i]);
        let (u, v) = apply(&t_img, image[i]);
        a.row_mut(2 * i)
            .copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]);
        a.row_mut(2 * i + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, -v]);
    }

    // Null vector of A via the smallest eigenpair of A^T A. (A thin SVD of
    // the 2n x 9 system would drop the null direction when 2n < 9+1.)
    let ata = a.transpose() * &a;
    let eig = ata.symmetric_eigen();
    let min_idx = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .ok_or_else(|| GeometryError::NumericalFailure("eigen decomposition failed".into()))?;
    let hv: Vec<f64> = eig.eigenvectors.column(min_idx).iter().copied().collect();
    let h_norm = Matrix3::from_row_slice(&hv);

    let t_img_inv = t_img
        .try_inverse()
        .ok_or_else(|| GeometryError::NumericalFailure("singular normalization".into()))?;
    Ok(t_img_inv * h_norm * t_obj)
}

/// Similarity that moves a point set to zero centroid and sqrt(2) mean radius.
fn hartley_transform(points: &[(f64, f64)]) -> Result<Matrix3<f64>, GeometryError> {
    let n = points.len() as f64;
    let (mx, my) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (mx / n, my / n);
    let mean_dist = points
        .iter()
        .map(|p| ((p.0 - mx).powi(2) + (p.1 - my).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist < 1e-15 {
        return Err(GeometryError::DegenerateGeometry(
            "coincident points".into(),
        ));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0))
}

/// The two rotation candidates consistent with the homography's value and
/// Jacobian at the object centroid.
///
/// With `v` the normalized-image projection of the centroid and `J` the 2x2
/// Jacobian there, any exact pose satisfies `J = (1/t_z) * A * R[:,0:2]` with
/// `A = [I | -v]`. Rotating the frame so `v` lands on the optical axis turns
/// that into `C = t_z * D` for a known `D` and the upper-left 2x2 block `C`
/// of the rotated rotation; orthonormality then fixes `t_z` from the largest
/// singular value of `D` and leaves a sign choice on the third row, which is
/// the planar two-fold ambiguity.
fn rotations_from_homography(
    h: &Matrix3<f64>,
) -> Result<(Matrix3<f64>, Matrix3<f64>), GeometryError> {
    let v0 = h[(0, 2)];
    let v1 = h[(1, 2)];
    let j = Matrix2::new(
        h[(0, 0)] - h[(2, 0)] * v0,
        h[(0, 1)] - h[(2, 1)] * v0,
        h[(1, 0)] - h[(2, 0)] * v1,
        h[(1, 1)] - h[(2, 1)] * v1,
    );

    // Rotation taking the optical axis onto the centroid's viewing ray.
    let ray = Vector3::new(v0, v1, 1.0).normalize();
    let rv = nalgebra::Rotation3::rotation_between(&Vector3::z(), &ray)
        .map(|r| r.into_inner())
        .unwrap_or_else(Matrix3::identity);

    let b = Matrix2::new(
        rv[(0, 0)] - v0 * rv[(2, 0)],
        rv[(0, 1)] - v0 * rv[(2, 1)],
        rv[(1, 0)] - v1 * rv[(2, 0)],
        rv[(1, 1)] - v1 * rv[(2, 1)],
    );
    let b_inv = b.try_inverse().ok_or_else(|| {
        GeometryError::NumericalFailure("singular viewing-ray projection".into())
    })?;
    let d = b_inv * j;

    // Eigenvalues of D^T D in closed form.
    let dtd = d.transpose() * d;
    let tr = dtd[(0, 0)] + dtd[(1, 1)];
    let det = dtd[(0, 0)] * dtd[(1, 1)] - dtd[(0, 1)] * dtd[(1, 0)];
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    let lam_max = 0.5 * (tr + disc);
    if lam_max <= 1e-30 {
        return Err(GeometryError::NumericalFailure(
            "vanishing homography Jacobian".into(),
        ));
    }

    // Scale fixed by gamma^2 * lam_max = 1; the third-row magnitude follows.
    let gamma = lam_max.sqrt().recip();
    let c = d * gamma;

    // bb^T = I - C^T C, rank one; take the square root via its larger
    // diagonal entry to stay stable when one component vanishes.
    let m = Matrix2::identity() - c.transpose() * c;
    let m00 = m[(0, 0)].max(0.0);
    let m11 = m[(1, 1)].max(0.0);
    let brow = if m00 >= m11 {
        let b0 = m00.sqrt();
        let b1 = if b0 > 1e-12 { m[(0, 1)] / b0 } else { 0.0 };
        Vector2::new(b0, b1)
    } else {
        let b1 = m11.sqrt();
        let b0 = if b1 > 1e-12 { m[(0, 1)] / b1 } else { 0.0 };
        Vector2::new(b0, b1)
    };

    let build = |sign: f64| -> Matrix3<f64> {
        let col1 = Vector3::new(c[(0, 0)], c[(1, 0)], sign * brow.x);
        let col2 = Vector3::new(c[(0, 1)], c[(1, 1)], sign * brow.y);
        let col3 = col1.cross(&col2);
        let r = Matrix3::from_columns(&[col1, col2, col3]);
        orthonormalize(&(rv * r))
    };

    Ok((build(1.0), build(-1.0)))
}

/// Projects a near-rotation onto SO(3) via SVD.
fn orthonormalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("3x3 SVD");
    let v_t = svd.v_t.expect("3x3 SVD");
    let det = (u * v_t).determinant();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum())) * v_t
}

/// Least-squares translation for a fixed rotation, in normalized coordinates.
fn translation_for_rotation(
    r: &Matrix3<f64>,
    object: &[(f64, f64)],
    image: &[(f64, f64)],
) -> Result<Vector3<f64>, GeometryError> {
    let n = object.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, 3);
    let mut rhs = DVector::<f64>::zeros(2 * n);
    for i in 0..n {
        let rp = r * Vector3::new(object[i].0, object[i].1, 0.0);
        let (u, v) = image[i];
        a.row_mut(2 * i).copy_from_slice(&[1.0, 0.0, -u]);
        a.row_mut(2 * i + 1).copy_from_slice(&[0.0, 1.0, -v]);
        rhs[2 * i] = u * rp.z - rp.x;
        rhs[2 * i + 1] = v * rp.z - rp.y;
    }
    let ata = a.transpose() * &a;
    let atb = a.transpose() * rhs;
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| GeometryError::NumericalFailure("translation system singular".into()))?;
    Ok(Vector3::new(sol[0], sol[1], sol[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    /// Scalar reference projection, written out independently of the library
    /// path (explicit matrix entries instead of composed products).
    fn oracle_project(
        cam: &CameraModel,
        (roll, pitch, yaw): (f64, f64, f64),
        t: (f64, f64, f64),
        p: (f64, f64),
    ) -> (f64, f64) {
        let (sr, cr) = roll.to_radians().sin_cos();
        let (sp, cp) = pitch.to_radians().sin_cos();
        let (sy, cy) = yaw.to_radians().sin_cos();
        // Ry(yaw)*Rx(pitch)*Rz(roll), expanded by hand.
        let r = [
            [cy * cr + sy * sp * sr, -cy * sr + sy * sp * cr, sy * cp],
            [cp * sr, cp * cr, -sp],
            [-sy * cr + cy * sp * sr, sy * sr + cy * sp * cr, cy * cp],
        ];
        let x = r[0][0] * p.0 + r[0][1] * p.1 + t.0;
        let y = r[1][0] * p.0 + r[1][1] * p.1 + t.1;
        let z = r[2][0] * p.0 + r[2][1] * p.1 + t.2;
        assert!(z > 0.0, "oracle point behind camera");
        let (nx, ny) = (x / z, y / z);
        let r2 = nx * nx + ny * ny;
        let f = 1.0 + cam.k1 * r2 + cam.k2 * r2 * r2;
        (cam.fx * nx * f + cam.cx, cam.fy * ny * f + cam.cy)
    }

    fn square(half: f64) -> Vec<(f64, f64)> {
        vec![(-half, half), (half, half), (half, -half), (-half, -half)]
    }

    fn grid9(half: f64) -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                pts.push((
                    (c as f64 - 1.0) * half,
                    (1.0 - r as f64) * half,
                ));
            }
        }
        pts
    }

    fn solve_for(
        cam: &CameraModel,
        euler: (f64, f64, f64),
        t: (f64, f64, f64),
        object: &[(f64, f64)],
    ) -> (PlanarPose, PlanarPose) {
        let image: Vec<(f64, f64)> = object
            .iter()
            .map(|&p| oracle_project(cam, euler, t, p))
            .collect();
        let corr = PlanarCorrespondence::new(object.to_vec(), image);
        solve_planar_pnp(&corr, cam).expect("solvable")
    }

    /// Angle in degrees between two rotations.
    fn rotation_error_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
        let r = a.transpose() * b;
        let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        c.acos().to_degrees()
    }

    #[test]
    fn project_matches_pinhole_by_hand() {
        let cam = CameraModel {
            fx: 1000.0,
            fy: 1000.0,
            cx: 500.0,
            cy: 500.0,
            width: 1000,
            height: 1000,
            k1: 0.0,
            k2: 0.0,
        };
        let pose = PlanarPose::identity_at(Vector3::new(0.0, 0.0, 2.0));
        // u = 1000 * 0.1 / 2 + 500
        let (u, v) = project(&cam, &pose, (0.1, 0.0)).unwrap();
        assert!((u - 550.0).abs() < 1e-12 && (v - 500.0).abs() < 1e-12);
    }

    #[test]
    fn project_rejects_points_behind_camera() {
        let cam = CameraModel::default();
        let pose = PlanarPose::identity_at(Vector3::new(0.0, 0.0, -1.0));
        assert!(matches!(
            project(&cam, &pose, (0.0, 0.0)),
            Err(GeometryError::NonPositiveDepth { .. })
        ));
    }

    #[test]
    fn fronto_parallel_square_gives_identity_pose() {
        let cam = CameraModel::default();
        let (a, _) = solve_for(&cam, (0.0, 0.0, 0.0), (0.0, 0.0, 2.0), &square(0.05));
        assert!(a.euler.roll.abs() < 1e-6);
        assert!(a.euler.pitch.abs() < 1e-6);
        assert!(a.euler.yaw.abs() < 1e-6);
        assert!((a.translation - Vector3::new(0.0, 0.0, 2.0)).norm() < 1e-6);
        assert!(a.rmse < 1e-9, "rmse {}", a.rmse);
    }

    #[test]
    fn yaw_30_recovered_with_mirror_ambiguity() {
        let cam = CameraModel::default();
        let (a, b) = solve_for(&cam, (0.0, 0.0, 30.0), (0.1, -0.05, 2.5), &square(0.05));
        assert!((a.euler.yaw - 30.0).abs() < 0.5, "yaw {}", a.euler.yaw);
        assert!(a.rmse <= b.rmse);
        // The alternate interpretation flips the out-of-plane tilt.
        assert!((b.euler.yaw + 30.0).abs() < 5.0, "mirror yaw {}", b.euler.yaw);
    }

    #[test]
    fn noiseless_recovery_is_exact_over_random_poses() {
        let cam = CameraModel::default();
        let mut rng = StdRng::seed_from_u64(7);
        for trial in 0..100 {
            let euler = (
                rng.gen_range(-40.0..40.0),
                rng.gen_range(-30.0..30.0),
                rng.gen_range(-45.0..45.0),
            );
            let t = (
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(1.5..4.5),
            );
            let (a, _) = solve_for(&cam, euler, t, &grid9(0.1));
            let truth = euler_to_rotation_ref(euler);
            let err = rotation_error_deg(&a.rotation, &truth);
            assert!(err < 1e-5, "trial {trial}: rotation error {err} deg");
            assert!(a.rmse < 1e-6, "trial {trial}: rmse {}", a.rmse);
        }
    }

    fn euler_to_rotation_ref((roll, pitch, yaw): (f64, f64, f64)) -> Matrix3<f64> {
        super::super::euler_to_rotation(roll, pitch, yaw)
    }

    #[test]
    fn recovery_through_radial_distortion() {
        let cam = CameraModel {
            k1: -0.15,
            k2: 0.02,
            ..CameraModel::default()
        };
        let (a, _) = solve_for(&cam, (5.0, -12.0, 20.0), (0.05, 0.1, 3.0), &grid9(0.1));
        let truth = euler_to_rotation_ref((5.0, -12.0, 20.0));
        assert!(rotation_error_deg(&a.rotation, &truth) < 1e-4);
    }

    #[test]
    fn shifting_all_points_one_pixel_gives_rmse_one() {
        let cam = CameraModel::default();
        let object = square(0.05);
        let image: Vec<(f64, f64)> = object
            .iter()
            .map(|&p| {
                let (u, v) = oracle_project(&cam, (0.0, 0.0, 0.0), (0.0, 0.0, 2.0), p);
                (u + 1.0, v)
            })
            .collect();
        let pose = PlanarPose::identity_at(Vector3::new(0.0, 0.0, 2.0));
        let corr = PlanarCorrespondence::new(object, image);
        let rmse = reprojection_rmse(&pose, &corr, &cam);
        assert!((rmse - 1.0).abs() < 1e-9, "rmse {rmse}");
    }

    #[test]
    fn infeasible_pose_has_infinite_rmse() {
        let cam = CameraModel::default();
        let corr = PlanarCorrespondence::new(square(0.05), square(0.05));
        let pose = PlanarPose::identity_at(Vector3::new(0.0, 0.0, -2.0));
        assert!(reprojection_rmse(&pose, &corr, &cam).is_infinite());
    }

    #[test]
    fn collinear_object_points_are_degenerate() {
        let cam = CameraModel::default();
        let object = vec![(0.0, 0.0), (0.01, 0.0), (0.02, 0.0), (0.03, 0.0)];
        let image = vec![(100.0, 100.0), (110.0, 100.0), (120.0, 100.0), (130.0, 100.0)];
        let r = solve_planar_pnp(&PlanarCorrespondence::new(object, image), &cam);
        assert!(matches!(r, Err(GeometryError::DegenerateGeometry(_))));
    }

    #[test]
    fn three_points_are_not_enough() {
        let cam = CameraModel::default();
        let corr = PlanarCorrespondence::new(
            vec![(0.0, 0.0), (0.1, 0.0), (0.0, 0.1)],
            vec![(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)],
        );
        assert!(matches!(
            solve_planar_pnp(&corr, &cam),
            Err(GeometryError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn solutions_are_ordered_by_rmse() {
        let cam = CameraModel::default();
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let euler = (
                rng.gen_range(-30.0..30.0),
                rng.gen_range(-25.0..25.0),
                rng.gen_range(-40.0..40.0),
            );
            let t = (0.0, 0.0, rng.gen_range(2.0..4.0));
            let object = grid9(0.1);
            let mut image: Vec<(f64, f64)> = object
                .iter()
                .map(|&p| oracle_project(&cam, euler, t, p))
                .collect();
            // Mild noise so the two candidates separate.
            for p in &mut image {
                p.0 += rng.gen_range(-0.3..0.3);
                p.1 += rng.gen_range(-0.3..0.3);
            }
            let (a, b) =
                solve_planar_pnp(&PlanarCorrespondence::new(object, image), &cam).unwrap();
            assert!(a.rmse <= b.rmse);
        }
    }
}
