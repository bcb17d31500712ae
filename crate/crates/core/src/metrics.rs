use serde::{Deserialize, Serialize};

use crate::transform::RigidTransform;

/// Translation error: Euclidean distance between estimated and true
/// translation, in meters.
pub fn rte(estimate: &RigidTransform, truth: &RigidTransform) -> f64 {
    (estimate.translation - truth.translation).norm()
}

/// Rotation error: geodesic angle between estimated and true rotation, in
/// degrees. The trace argument is clamped to [-1, 1] so rounding can never
/// produce NaN.
pub fn rre(estimate: &RigidTransform, truth: &RigidTransform) -> f64 {
    let rel = estimate.rotation.transpose() * truth.rotation;
    let cos = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    cos.acos().to_degrees()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessThreshold {
    pub rte_max: f64,
    pub rre_max: f64,
}

impl Default for SuccessThreshold {
    fn default() -> Self {
        Self { rte_max: 0.6, rre_max: 1.5 }
    }
}

impl SuccessThreshold {
    pub fn is_success(&self, estimate: &RigidTransform, truth: &RigidTransform) -> bool {
        rte(estimate, truth) < self.rte_max && rre(estimate, truth) < self.rre_max
    }
}

/// Percentage (0-100) of (truth, estimate) pairs within threshold.
pub fn registration_recall(
    pairs: &[(RigidTransform, RigidTransform)],
    threshold: &SuccessThreshold,
) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let hits = pairs.iter().filter(|(truth, est)| threshold.is_success(est, truth)).count();
    100.0 * hits as f64 / pairs.len() as f64
}

/// One recall-curve sample: the strictness parameter, the thresholds it
/// denotes, and the recall they produce.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallSample {
    pub strictness: f64,
    pub rte_max: f64,
    pub rre_max: f64,
    pub recall: f64,
}

/// Threshold family interpolating between a strict operating point at s=0
/// (0.6 m, 1.5°) and a loose one at s=1 (2.0 m, 5.0°), extrapolated linearly
/// outside [0, 1] and clipped so both thresholds stay positive.
pub fn strictness_thresholds(s: f64) -> SuccessThreshold {
    // Both lines reach zero at s = -3/7; clip just above so thresholds are
    // strictly positive.
    const S_MIN: f64 = -3.0 / 7.0 + 1e-9;
    let s = s.max(S_MIN);
    SuccessThreshold { rte_max: 0.6 + 1.4 * s, rre_max: 1.5 + 3.5 * s }
}

/// Recall as a function of threshold strictness, sampled at `steps` evenly
/// spaced values of s across `range`. Samples landing within 1e-9 of the two
/// anchor points are snapped onto them exactly so the curve passes through
/// the canonical operating points.
pub fn recall_curve(
    pairs: &[(RigidTransform, RigidTransform)],
    range: (f64, f64),
    steps: usize,
) -> Vec<RecallSample> {
    let (lo, hi) = range;
    assert!(steps >= 2 && hi > lo, "need steps >= 2 and hi > lo");
    (0..steps)
        .map(|k| {
            let mut s = lo + (hi - lo) * k as f64 / (steps - 1) as f64;
            if (s - 0.0).abs() < 1e-9 {
                s = 0.0;
            } else if (s - 1.0).abs() < 1e-9 {
                s = 1.0;
            }
            let thr = strictness_thresholds(s);
            RecallSample {
                strictness: s,
                rte_max: thr.rte_max,
                rre_max: thr.rre_max,
                recall: registration_recall(pairs, &thr),
            }
        })
        .collect()
}

pub const DEFAULT_CURVE_RANGE: (f64, f64) = (-0.4, 2.0);
pub const DEFAULT_CURVE_STEPS: usize = 25;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::euler_xyz;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    #[test]
    fn rte_is_translation_distance() {
        let a = RigidTransform::new(nalgebra::Matrix3::identity(), Vector3::new(1.0, 2.0, 2.0));
        let b = RigidTransform::identity();
        assert_relative_eq!(rte(&a, &b), 3.0, max_relative = 1e-15);
    }

    #[test]
    fn rre_matches_axis_angle_magnitude() {
        for &deg in &[0.0f64, 0.5, 10.0, 90.0, 179.0] {
            let t = RigidTransform::new(euler_xyz(0.0, 0.0, deg.to_radians()), Vector3::zeros());
            assert_relative_eq!(rre(&t, &RigidTransform::identity()), deg, epsilon = 1e-9);
        }
    }

    #[test]
    fn rre_never_nan_at_extremes() {
        let id = RigidTransform::identity();
        assert_eq!(rre(&id, &id), 0.0);
        let pi = RigidTransform::new(euler_xyz(0.0, 0.0, std::f64::consts::PI), Vector3::zeros());
        let v = rre(&pi, &id);
        assert!(v.is_finite());
        assert_relative_eq!(v, 180.0, epsilon = 1e-6);
    }

    #[test]
    fn recall_counts_strict_inequalities() {
        let id = RigidTransform::identity();
        let at = |d: f64| RigidTransform::new(nalgebra::Matrix3::identity(), Vector3::new(d, 0.0, 0.0));
        let thr = SuccessThreshold { rte_max: 1.0, rre_max: 5.0 };
        // Exactly at the threshold is a failure.
        let pairs = vec![(id, at(0.5)), (id, at(1.0)), (id, at(2.0)), (id, at(0.0))];
        assert_relative_eq!(registration_recall(&pairs, &thr), 50.0);
        assert_eq!(registration_recall(&[], &thr), 0.0);
    }

    #[test]
    fn strictness_anchors() {
        let s0 = strictness_thresholds(0.0);
        assert_eq!(s0.rte_max, 0.6);
        assert_eq!(s0.rre_max, 1.5);
        let s1 = strictness_thresholds(1.0);
        assert_eq!(s1.rte_max, 2.0);
        assert_eq!(s1.rre_max, 5.0);
    }

    #[test]
    fn strictness_clips_to_positive() {
        let t = strictness_thresholds(-10.0);
        assert!(t.rte_max > 0.0);
        assert!(t.rre_max > 0.0);
    }

    #[test]
    fn curve_hits_anchors_exactly_and_is_monotone() {
        let id = RigidTransform::identity();
        let at = |d: f64| RigidTransform::new(nalgebra::Matrix3::identity(), Vector3::new(d, 0.0, 0.0));
        let pairs: Vec<_> = (0..50).map(|i| (id, at(i as f64 * 0.05))).collect();
        // Range chosen so the grid lands on 0 and 1 up to rounding: 25 steps
        // over [-0.4, 2.0] has spacing 0.1.
        let curve = recall_curve(&pairs, DEFAULT_CURVE_RANGE, DEFAULT_CURVE_STEPS);
        assert!(curve.iter().any(|s| s.strictness == 0.0 && s.rte_max == 0.6));
        assert!(curve.iter().any(|s| s.strictness == 1.0 && s.rte_max == 2.0));
        for w in curve.windows(2) {
            assert!(w[1].recall >= w[0].recall, "recall must not decrease with looser thresholds");
        }
    }
}
