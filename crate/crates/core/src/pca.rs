use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::DescriptorCloud;
use crate::error::{Error, Result};
use crate::seeding::derive_seed;

/// Convergence tolerance for the power iteration.
const POWER_TOLERANCE: f64 = 1e-8;
/// Iteration cap; near-degenerate eigenvalue gaps converge slowly.
const POWER_MAX_ITERATIONS: usize = 10_000;
/// Relative eigenvalue floor below which the covariance counts as rank < 3.
const RANK_EPSILON: f64 = 1e-9;

/// Maps high-dimensional descriptors to RGB via their top-3 principal axes.
///
/// `components` rows are mutually orthonormal to 1e-6; channel bounds are the
/// 1st/99th percentiles of the fitting cloud's projections.
#[derive(Clone, Debug)]
pub struct PcaColorizer {
    pub mean: DVector<f64>,
    pub components: [DVector<f64>; 3],
    pub channel_min: [f64; 3],
    pub channel_max: [f64; 3],
}

impl PcaColorizer {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Centered projection of one descriptor onto the three principal axes.
    pub fn project(&self, descriptor: &[f32]) -> [f64; 3] {
        assert_eq!(descriptor.len(), self.dim(), "descriptor dimension mismatch");
        let mut out = [0.0; 3];
        for (k, axis) in self.components.iter().enumerate() {
            let mut s = 0.0;
            for (j, &x) in descriptor.iter().enumerate() {
                s += (x as f64 - self.mean[j]) * axis[j];
            }
            out[k] = s;
        }
        out
    }

    /// Per-point RGB: each channel is the projection normalized to the fitted
    /// channel bounds, clamped to [0, 1], scaled to 255, rounded half-to-even.
    pub fn colorize(&self, c: &DescriptorCloud) -> Vec<[u8; 3]> {
        assert_eq!(c.dim(), self.dim(), "descriptor dimension mismatch");
        (0..c.len())
            .map(|i| {
                let p = self.project(c.descriptor(i));
                let mut rgb = [0u8; 3];
                for k in 0..3 {
                    let span = self.channel_max[k] - self.channel_min[k];
                    let t = if span > 0.0 {
                        ((p[k] - self.channel_min[k]) / span).clamp(0.0, 1.0)
                    } else {
                        0.5
                    };
                    rgb[k] = (t * 255.0).round_ties_even() as u8;
                }
                rgb
            })
            .collect()
    }
}

/// Fits mean, top-3 principal axes (power iteration with deflation), and
/// 1st/99th-percentile channel bounds on the cloud's descriptors.
pub fn fit_pca(c: &DescriptorCloud, seed: u64) -> Result<PcaColorizer> {
    let n = c.len();
    let d = c.dim();
    if n < 4 {
        return Err(Error::InvalidConfig(format!(
            "PCA needs at least 4 points, got {n}"
        )));
    }
    let mut mean = DVector::<f64>::zeros(d);
    for i in 0..n {
        for (j, &x) in c.descriptor(i).iter().enumerate() {
            mean[j] += x as f64;
        }
    }
    mean /= n as f64;

    // Covariance-vector product without forming the d×d matrix:
    // C v = (Σ_i x_i ((x_i − μ)·v) − μ Σ_i (x_i − μ)·v) / (n − 1).
    let apply_cov = |v: &DVector<f64>| -> DVector<f64> {
        let mu_dot_v = mean.dot(v);
        let mut out = DVector::<f64>::zeros(d);
        let mut s_sum = 0.0;
        for i in 0..n {
            let row = c.descriptor(i);
            let mut s = -mu_dot_v;
            for (j, &x) in row.iter().enumerate() {
                s += x as f64 * v[j];
            }
            for (j, &x) in row.iter().enumerate() {
                out[j] += s * x as f64;
            }
            s_sum += s;
        }
        out.axpy(-s_sum, &mean, 1.0);
        out / (n - 1) as f64
    };

    let mut components: Vec<DVector<f64>> = Vec::with_capacity(3);
    let mut eigenvalues = [0.0f64; 3];
    for k in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
        let mut v = DVector::from_fn(d, |_, _| rng.random::<f64>() - 0.5);
        orthogonalize(&mut v, &components);
        if v.norm() == 0.0 {
            return Err(Error::RankDeficient);
        }
        v.normalize_mut();
        for _ in 0..POWER_MAX_ITERATIONS {
            let mut next = apply_cov(&v);
            orthogonalize(&mut next, &components);
            let norm = next.norm();
            if norm <= f64::MIN_POSITIVE {
                return Err(Error::RankDeficient);
            }
            next /= norm;
            if next.dot(&v) < 0.0 {
                next = -next;
            }
            let delta = (&next - &v).norm();
            v = next;
            if delta < POWER_TOLERANCE {
                break;
            }
        }
        // Deterministic sign: largest-magnitude coefficient positive.
        let lead = (0..d).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
        if v[lead] < 0.0 {
            v = -v;
        }
        let mut cv = apply_cov(&v);
        orthogonalize(&mut cv, &components);
        eigenvalues[k] = v.dot(&cv);
        components.push(v);
    }
    if eigenvalues[0] <= 1e-15 || eigenvalues[2] < eigenvalues[0] * RANK_EPSILON {
        return Err(Error::RankDeficient);
    }

    let components: [DVector<f64>; 3] = components.try_into().expect("three axes");
    let mut pca = PcaColorizer {
        mean,
        components,
        channel_min: [0.0; 3],
        channel_max: [0.0; 3],
    };
    for k in 0..3 {
        let mut proj: Vec<f64> =
            (0..n).map(|i| pca.project(c.descriptor(i))[k]).collect();
        proj.sort_by(f64::total_cmp);
        pca.channel_min[k] = nearest_rank(&proj, 1.0);
        pca.channel_max[k] = nearest_rank(&proj, 99.0);
    }
    Ok(pca)
}

fn orthogonalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for q in basis {
        let c = q.dot(v);
        v.axpy(-c, q, 1.0);
    }
}

/// Nearest-rank percentile of an ascending-sorted slice.
fn nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    let rank = (pct / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
