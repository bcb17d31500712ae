use nalgebra::{Matrix3, Vector3};

use crate::cloud::PointCloud;

/// Frobenius drift of `R^T R` from identity above which a rotation is
/// re-orthonormalized after composition.
pub const ORTHONORMALITY_DRIFT_MAX: f64 = 1e-12;

/// Rigid motion in 3-D: `p -> R p + t` with `R` orthonormal, `det(R) = +1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Builds a transform, re-orthonormalizing the rotation if it has drifted.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        if orthonormality_drift(&rotation) > ORTHONORMALITY_DRIFT_MAX {
            Self { rotation: orthonormalize(&rotation), translation }
        } else {
            Self { rotation, translation }
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud::new(cloud.points.iter().map(|p| self.apply_point(p)).collect())
    }
}

/// `‖R^T R − I‖_F`.
pub fn orthonormality_drift(rotation: &Matrix3<f64>) -> f64 {
    (rotation.transpose() * rotation - Matrix3::identity()).norm()
}

/// Nearest rotation matrix (special orthogonal Procrustes projection).
pub fn orthonormalize(rotation: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = rotation.svd(true, true);
    let u = svd.u.expect("svd of 3x3 always yields u");
    let v_t = svd.v_t.expect("svd of 3x3 always yields v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u_fixed = u;
        u_fixed.column_mut(2).neg_mut();
        r = u_fixed * v_t;
    }
    r
}

pub fn rotation_x(angle_rad: f64) -> Matrix3<f64> {
    let (s, c) = angle_rad.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rotation_y(angle_rad: f64) -> Matrix3<f64> {
    let (s, c) = angle_rad.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rotation_z(angle_rad: f64) -> Matrix3<f64> {
    let (s, c) = angle_rad.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Intrinsic x-y-z Euler rotation: `R = Rx(rx) · Ry(ry) · Rz(rz)`.
pub fn euler_xyz(rx: f64, ry: f64, rz: f64) -> Matrix3<f64> {
    rotation_x(rx) * rotation_y(ry) * rotation_z(rz)
}
