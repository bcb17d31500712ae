use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{DescriptorCloud, PointCloud};
use crate::downsample::random_downsample;
use crate::error::{Error, Result};
use crate::kabsch::align_kabsch;
use crate::matching::{match_descriptors, normalize_descriptors, Correspondence, MatchConfig};
use crate::seeding::derive_seed;
use crate::spatial::VoxelHashIndex;
use crate::transform::RigidTransform;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub iterations: usize,
    /// A correspondence is an inlier when `‖T(p_scan) − p_map‖ <` this.
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    pub seed: u64,
    /// Adaptive termination once the best model makes further improvement
    /// overwhelmingly unlikely; off by default so every configured iteration
    /// runs.
    pub early_stop: bool,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 50_000,
            inlier_threshold: 0.5,
            min_inliers: 10,
            seed: 0,
            early_stop: false,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::InvalidConfig("inlier_threshold must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpConfig {
    pub max_correspondence_distance: f64,
    pub max_iterations: usize,
    /// Convergence once the relative change of the per-iteration RMSE drops
    /// below this.
    pub convergence_delta: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_correspondence_distance: 1.0,
            max_iterations: 100,
            convergence_delta: 1e-6,
        }
    }
}

impl IcpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_correspondence_distance > 0.0)
            || self.max_iterations == 0
            || !(self.convergence_delta > 0.0)
        {
            return Err(Error::InvalidConfig(
                "ICP parameters must all be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcpOutcome {
    pub transform: RigidTransform,
    /// RMSE over the final associated pair set, after the final solve.
    pub rmse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Post-solve RMSE per iteration, for convergence diagnostics.
    pub rmse_history: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegistrationResult {
    pub coarse: RigidTransform,
    pub fine: RigidTransform,
    pub inlier_count: usize,
    pub icp_rmse: f64,
    pub icp_iterations: usize,
    pub converged: bool,
}

/// 3-point RANSAC over descriptor correspondences. Per iteration: draw three
/// distinct correspondences from a counter-based per-iteration RNG stream
/// (so results do not depend on thread count), skip degenerate triples, solve
/// the minimal rigid alignment, and count inliers. The best model (max
/// inliers, earliest iteration on ties) is refit on its consensus set; the
/// refit is kept only if it does not lose inliers.
pub fn ransac_align(
    scan: &PointCloud,
    map: &PointCloud,
    corrs: &[Correspondence],
    cfg: &RansacConfig,
) -> Result<(RigidTransform, usize)> {
    cfg.validate()?;
    if corrs.len() < 3 {
        return Err(Error::TooFewCorrespondences { got: corrs.len() });
    }

    let src: Vec<Vector3<f64>> = corrs.iter().map(|c| scan.points[c.scan_index]).collect();
    let dst: Vec<Vector3<f64>> = corrs.iter().map(|c| map.points[c.map_index]).collect();
    let n = src.len();
    let thr2 = cfg.inlier_threshold * cfg.inlier_threshold;

    let count_inliers = |t: &RigidTransform| -> usize {
        src.iter()
            .zip(&dst)
            .filter(|(s, d)| (t.apply_point(s) - *d).norm_squared() < thr2)
            .count()
    };

    // Chunked evaluation: parallel inside a chunk, sequential best-model
    // reduction between chunks, so early stopping is thread-count-invariant.
    const CHUNK: usize = 4096;
    let mut best: Option<(usize, usize, RigidTransform)> = None; // (count, iter, model)
    let mut done = 0usize;
    while done < cfg.iterations {
        let chunk = CHUNK.min(cfg.iterations - done);
        let results: Vec<(usize, usize, RigidTransform)> = (done..done + chunk)
            .into_par_iter()
            .filter_map(|iter| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, iter as u64));
                let i0 = rng.random_range(0..n);
                let mut i1 = rng.random_range(0..n);
                while i1 == i0 {
                    i1 = rng.random_range(0..n);
                }
                let mut i2 = rng.random_range(0..n);
                while i2 == i0 || i2 == i1 {
                    i2 = rng.random_range(0..n);
                }
                let model = align_kabsch(
                    &[src[i0], src[i1], src[i2]],
                    &[dst[i0], dst[i1], dst[i2]],
                )
                .ok()?;
                Some((count_inliers(&model), iter, model))
            })
            .collect();
        for (count, iter, model) in results {
            let better = match &best {
                None => true,
                Some((bc, bi, _)) => count > *bc || (count == *bc && iter < *bi),
            };
            if better {
                best = Some((count, iter, model));
            }
        }
        done += chunk;

        if cfg.early_stop {
            if let Some((count, _, _)) = &best {
                if *count >= cfg.min_inliers.max(3) {
                    let w = *count as f64 / n as f64;
                    let p_triple = (w * w * w).min(1.0 - 1e-12);
                    // Enough iterations that a better all-inlier triple would
                    // have been seen with probability 0.999.
                    let needed = ((1e-3f64).ln() / (1.0 - p_triple).ln()).ceil();
                    if (done as f64) >= needed {
                        break;
                    }
                }
            }
        }
    }

    let Some((best_count, _, best_model)) = best else {
        return Err(Error::NoModel { best: 0, min_inliers: cfg.min_inliers });
    };
    if best_count < cfg.min_inliers {
        return Err(Error::NoModel { best: best_count, min_inliers: cfg.min_inliers });
    }

    let mut inl_src = Vec::with_capacity(best_count);
    let mut inl_dst = Vec::with_capacity(best_count);
    for (s, d) in src.iter().zip(&dst) {
        if (best_model.apply_point(s) - d).norm_squared() < thr2 {
            inl_src.push(*s);
            inl_dst.push(*d);
        }
    }
    if let Ok(refit) = align_kabsch(&inl_src, &inl_dst) {
        let refit_count = count_inliers(&refit);
        if refit_count >= best_count {
            return Ok((refit, refit_count));
        }
    }
    Ok((best_model, best_count))
}

/// Point-to-point ICP against a spatial index over the map. Each iteration
/// associates every scan point to its exact nearest map point within
/// `max_correspondence_distance` (computed at the current pose) and re-solves
/// the absolute scan-to-map alignment from scratch on the associated pairs.
/// The recorded RMSE is the post-solve residual over that iteration's pairs.
pub fn icp_refine(
    scan: &PointCloud,
    map: &PointCloud,
    init: &RigidTransform,
    cfg: &IcpConfig,
) -> Result<IcpOutcome> {
    cfg.validate()?;
    if scan.is_empty() || map.is_empty() {
        return Err(Error::NoAssociations { max_distance: cfg.max_correspondence_distance });
    }

    let radius = cfg.max_correspondence_distance;
    let cell = (radius / 4.0).clamp(0.05, 1.0);
    let index = VoxelHashIndex::build(&map.points, cell);

    let mut transform = *init;
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;

    for iteration in 0..cfg.max_iterations {
        // Association at the current pose (parallel, order-stable).
        let pairs: Vec<(usize, usize)> = scan
            .points
            .par_iter()
            .enumerate()
            .filter_map(|(i, p)| {
                let q = transform.apply_point(p);
                index.nearest_within(&q, radius).map(|(j, _)| (i, j))
            })
            .collect();

        if pairs.is_empty() {
            if iteration == 0 {
                return Err(Error::NoAssociations { max_distance: radius });
            }
            converged = false;
            break;
        }

        let src: Vec<Vector3<f64>> = pairs.iter().map(|&(i, _)| scan.points[i]).collect();
        let dst: Vec<Vector3<f64>> = pairs.iter().map(|&(_, j)| map.points[j]).collect();
        let Ok(solved) = align_kabsch(&src, &dst) else {
            converged = false;
            break;
        };
        transform = solved;

        let mut sq_sum = 0.0f64;
        for (s, d) in src.iter().zip(&dst) {
            sq_sum += (transform.apply_point(s) - d).norm_squared();
        }
        let rmse = (sq_sum / src.len() as f64).sqrt();
        let prev = history.last().copied();
        history.push(rmse);

        if let Some(prev) = prev {
            let rel = (prev - rmse).abs() / prev.max(f64::MIN_POSITIVE);
            if rel < cfg.convergence_delta || rmse == 0.0 {
                converged = true;
                break;
            }
        } else if rmse == 0.0 {
            converged = true;
            break;
        }
    }

    let rmse = history.last().copied().unwrap_or(f64::INFINITY);
    Ok(IcpOutcome {
        transform,
        rmse,
        iterations: history.len(),
        converged,
        rmse_history: history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegisterConfig {
    pub matching: MatchConfig,
    pub ransac: RansacConfig,
    pub icp: IcpConfig,
    /// Scan reduction factor before matching (~m/80 keeps RANSAC cheap).
    pub downsample_factor: usize,
    /// Pipeline seed; drives the random downsample and the RANSAC stream
    /// (the `ransac.seed` field applies when calling `ransac_align` alone).
    pub seed: u64,
}

impl Default for RegisterConfig {
    fn default() -> Self {
        Self {
            matching: MatchConfig::default(),
            ransac: RansacConfig::default(),
            icp: IcpConfig::default(),
            downsample_factor: 80,
            seed: 0,
        }
    }
}

/// Everything the pipeline produced before the first failure, if any.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub correspondences: usize,
    pub coarse: Option<(RigidTransform, usize)>,
    pub icp: Option<IcpOutcome>,
    pub error: Option<Error>,
}

/// Full coarse-to-fine pipeline: random-downsample the scan, normalize
/// descriptors, match, RANSAC-align, then ICP-refine the full original scan
/// geometry. Stages after a failure are skipped; everything computed up to
/// that point is returned.
pub fn register_pipeline(
    scan: &DescriptorCloud,
    map: &DescriptorCloud,
    cfg: &RegisterConfig,
) -> PipelineOutcome {
    let mut outcome =
        PipelineOutcome { correspondences: 0, coarse: None, icp: None, error: None };
    if scan.is_empty() || map.is_empty() {
        outcome.error = Some(Error::EmptyResult);
        return outcome;
    }

    let reduced = random_downsample(scan, cfg.downsample_factor.max(1), derive_seed(cfg.seed, 1));
    let scan_n = normalize_descriptors(&reduced);
    let map_n = normalize_descriptors(map);

    let corrs = match match_descriptors(&scan_n, &map_n, &cfg.matching) {
        Ok(c) => c,
        Err(e) => {
            outcome.error = Some(e);
            return outcome;
        }
    };
    outcome.correspondences = corrs.len();

    let mut rcfg = cfg.ransac;
    rcfg.seed = derive_seed(cfg.seed, 2);
    match ransac_align(&scan_n.cloud, &map_n.cloud, &corrs, &rcfg) {
        Ok(coarse) => outcome.coarse = Some(coarse),
        Err(e) => {
            outcome.error = Some(e);
            return outcome;
        }
    }

    let (coarse, _) = outcome.coarse.as_ref().unwrap();
    match icp_refine(&scan.cloud, &map.cloud, coarse, &cfg.icp) {
        Ok(icp) => outcome.icp = Some(icp),
        Err(e) => outcome.error = Some(e),
    }
    outcome
}

/// `register_pipeline` with failure promoted to `Err`.
pub fn register(
    scan: &DescriptorCloud,
    map: &DescriptorCloud,
    cfg: &RegisterConfig,
) -> Result<RegistrationResult> {
    let outcome = register_pipeline(scan, map, cfg);
    if let Some(err) = outcome.error {
        return Err(err);
    }
    let (coarse, inlier_count) = outcome.coarse.expect("no error implies coarse model");
    let icp = outcome.icp.expect("no error implies icp outcome");
    Ok(RegistrationResult {
        coarse,
        fine: icp.transform,
        inlier_count,
        icp_rmse: icp.rmse,
        icp_iterations: icp.iterations,
        converged: icp.converged,
    })
}
