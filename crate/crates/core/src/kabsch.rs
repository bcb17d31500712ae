use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::transform::RigidTransform;

/// Normalized-cross-product threshold below which a source set counts as
/// collinear (no unique rotation).
const COLLINEARITY_EPS: f64 = 1e-9;

/// Least-squares rigid alignment (no scale): finds `T` minimizing
/// `Σ ‖T(src[i]) − dst[i]‖²` via SVD of the cross-covariance, with the
/// reflection case corrected on the smallest singular direction.
pub fn align_kabsch(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::DegenerateSample("source and destination counts differ"));
    }
    if src.len() < 3 {
        return Err(Error::DegenerateSample("fewer than 3 point pairs"));
    }
    if is_collinear(src) {
        return Err(Error::DegenerateSample("source points are collinear"));
    }

    let n = src.len() as f64;
    let mut src_c = Vector3::zeros();
    let mut dst_c = Vector3::zeros();
    for (s, d) in src.iter().zip(dst) {
        src_c += s;
        dst_c += d;
    }
    src_c /= n;
    dst_c /= n;

    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - src_c) * (d - dst_c).transpose();
    }

    let svd = h.svd(true, true);
    let u = svd.u.expect("3x3 svd yields u");
    let v_t = svd.v_t.expect("3x3 svd yields v_t");
    let v = v_t.transpose();

    // Singular values are sorted descending; a negative determinant is folded
    // onto the smallest one.
    let mut rotation = v * u.transpose();
    if rotation.determinant() < 0.0 {
        let mut v_fixed = v;
        v_fixed.column_mut(2).neg_mut();
        rotation = v_fixed * u.transpose();
    }

    let translation = dst_c - rotation * src_c;
    Ok(RigidTransform::new(rotation, translation))
}

/// True when every point lies on one line (or all points coincide).
fn is_collinear(points: &[Vector3<f64>]) -> bool {
    let base = points[0];
    let mut axis = None;
    for p in &points[1..] {
        let d = p - base;
        let norm = d.norm();
        if norm > 0.0 {
            axis = Some(d / norm);
            break;
        }
    }
    let Some(axis) = axis else {
        return true; // all coincident
    };
    points.iter().all(|p| {
        let d = p - base;
        let norm = d.norm();
        norm == 0.0 || (d / norm).cross(&axis).norm() < COLLINEARITY_EPS
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::euler_xyz;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                )
            })
            .collect()
    }

    #[test]
    fn recovers_exact_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let t_true = RigidTransform::new(
                euler_xyz(
                    rng.random_range(-3.0..3.0),
                    rng.random_range(-1.5..1.5),
                    rng.random_range(-3.0..3.0),
                ),
                Vector3::new(
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-5.0..5.0),
                ),
            );
            let src = random_points(&mut rng, 12);
            let dst: Vec<_> = src.iter().map(|p| t_true.apply_point(p)).collect();
            let est = align_kabsch(&src, &dst).unwrap();
            assert_relative_eq!(est.rotation, t_true.rotation, epsilon = 1e-10);
            assert_relative_eq!(est.translation, t_true.translation, epsilon = 1e-9);
        }
    }

    #[test]
    fn minimal_three_point_sample_is_exact() {
        let t_true = RigidTransform::new(euler_xyz(0.2, 0.1, -1.0), Vector3::new(3.0, -1.0, 2.0));
        let src = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 2.0, 0.5),
        ];
        let dst: Vec<_> = src.iter().map(|p| t_true.apply_point(p)).collect();
        let est = align_kabsch(&src, &dst).unwrap();
        assert_relative_eq!(est.rotation, t_true.rotation, epsilon = 1e-12);
        assert_relative_eq!(est.translation, t_true.translation, epsilon = 1e-12);
    }

    #[test]
    fn collinear_sources_are_rejected() {
        let src = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(2.0, 2.0, 2.0),
        ];
        let dst = src.clone();
        assert!(matches!(
            align_kabsch(&src, &dst),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn coincident_sources_are_rejected() {
        let src = vec![Vector3::zeros(); 3];
        assert!(align_kabsch(&src, &src).is_err());
    }

    #[test]
    fn count_mismatch_and_short_inputs_are_rejected() {
        let a = vec![Vector3::zeros(), Vector3::new(1.0, 0.0, 0.0)];
        let b = vec![Vector3::zeros()];
        assert!(align_kabsch(&a, &b).is_err());
        assert!(align_kabsch(&b, &b).is_err());
    }

    #[test]
    fn mirrored_targets_still_yield_proper_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = random_points(&mut rng, 20);
        let dst: Vec<_> = src
            .iter()
            .map(|p| Vector3::new(-p.x, p.y, p.z))
            .collect();
        let est = align_kabsch(&src, &dst).unwrap();
        assert!(est.rotation.determinant() > 0.99);
    }

    #[test]
    fn noisy_alignment_stays_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t_true = RigidTransform::new(euler_xyz(0.0, 0.0, 0.7), Vector3::new(5.0, 2.0, 0.0));
        let src = random_points(&mut rng, 200);
        let dst: Vec<_> = src
            .iter()
            .map(|p| {
                t_true.apply_point(p)
                    + Vector3::new(
                        rng.random_range(-0.01..0.01),
                        rng.random_range(-0.01..0.01),
                        rng.random_range(-0.01..0.01),
                    )
            })
            .collect();
        let est = align_kabsch(&src, &dst).unwrap();
        assert!((est.translation - t_true.translation).norm() < 0.01);
    }
}
