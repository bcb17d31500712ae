use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{DescriptorCloud, VoxelGridParams};
use crate::downsample::voxel_downsample;
use crate::error::{Error, Result};
use crate::metrics::{rre, rte, SuccessThreshold};
use crate::registration::{register_pipeline, RegisterConfig};
use crate::seeding::derive_seed;
use crate::synth::{simulate_scan, SemanticWorld};
use crate::transform::{euler_xyz, RigidTransform};

/// Maximum map extent per axis, meters (twice the mapping radius).
pub const MAX_MAP_EXTENT: f64 = 300.0;

/// One evaluation scene: a prebuilt map plus the session scans to register
/// against it, each with its ground-truth scan-to-map transform.
#[derive(Clone, Debug)]
pub struct BenchmarkScene {
    pub map: DescriptorCloud,
    pub scans: Vec<(u32, DescriptorCloud)>,
    pub ground_truths: Vec<RigidTransform>,
    pub center: Vector3<f64>,
    pub prior_radius: f64,
}

impl BenchmarkScene {
    pub fn new(
        map: DescriptorCloud,
        scans: Vec<(u32, DescriptorCloud)>,
        ground_truths: Vec<RigidTransform>,
        center: Vector3<f64>,
        prior_radius: f64,
    ) -> Result<Self> {
        if scans.is_empty() || scans.len() != ground_truths.len() {
            return Err(Error::InvalidConfig(format!(
                "need scans.len() == ground_truths.len() >= 1, got {} and {}",
                scans.len(),
                ground_truths.len()
            )));
        }
        if let Some((lo, hi)) = map.cloud.bounds() {
            let ext = hi - lo;
            if ext.x > MAX_MAP_EXTENT || ext.y > MAX_MAP_EXTENT || ext.z > MAX_MAP_EXTENT {
                return Err(Error::InvalidConfig(format!(
                    "map extent {:.1}×{:.1}×{:.1} exceeds {MAX_MAP_EXTENT} m per axis",
                    ext.x, ext.y, ext.z
                )));
            }
        }
        Ok(Self { map, scans, ground_truths, center, prior_radius })
    }
}

pub const DEFAULT_PRIOR_RADIUS: f64 = 100.0;

/// Assembles a local map from posed keyframes: keep those within `radius` of
/// `center`, greedily thin them so consecutive kept frames are at least
/// `spacing` apart, move each into the world frame, concatenate, and
/// voxel-downsample.
pub fn build_scene(
    keyframes: &[(DescriptorCloud, RigidTransform)],
    center: &Vector3<f64>,
    radius: f64,
    spacing: f64,
    voxel: &VoxelGridParams,
) -> Result<DescriptorCloud> {
    voxel.validate()?;
    let mut kept: Vec<&(DescriptorCloud, RigidTransform)> = Vec::new();
    let mut last_pos: Option<Vector3<f64>> = None;
    for kf in keyframes {
        let pos = kf.1.translation;
        if (pos - center).norm() > radius {
            continue;
        }
        if let Some(last) = last_pos {
            if (pos - last).norm() < spacing {
                continue;
            }
        }
        kept.push(kf);
        last_pos = Some(pos);
    }
    if kept.is_empty() {
        return Err(Error::EmptyMap { radius });
    }
    let moved: Vec<DescriptorCloud> =
        kept.iter().map(|(cloud, pose)| cloud.transformed(pose)).collect();
    let refs: Vec<&DescriptorCloud> = moved.iter().collect();
    let merged = DescriptorCloud::concat(&refs)?;
    Ok(voxel_downsample(&merged, voxel))
}

/// Gaussian noise applied to a ground-truth pose. Sigmas are standard
/// deviations; translations in meters, rotations in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationModel {
    pub sigma_t_xy: f64,
    pub sigma_t_z: f64,
    pub sigma_r_xy: f64,
    pub sigma_r_z: f64,
}

impl Default for PerturbationModel {
    fn default() -> Self {
        Self { sigma_t_xy: 10.0, sigma_t_z: 1.0, sigma_r_xy: 2.0, sigma_r_z: 10.0 }
    }
}

impl PerturbationModel {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_t_xy < 0.0
            || self.sigma_t_z < 0.0
            || self.sigma_r_xy < 0.0
            || self.sigma_r_z < 0.0
        {
            return Err(Error::InvalidConfig("perturbation sigmas must be >= 0".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sigma_t_xy: self.sigma_t_xy * factor,
            sigma_t_z: self.sigma_t_z * factor,
            sigma_r_xy: self.sigma_r_xy * factor,
            sigma_r_z: self.sigma_r_z * factor,
        }
    }
}

/// Composes `gt` with a random rigid noise transform: translation drawn per
/// axis, rotation as intrinsic x-y-z Euler angles drawn per axis. Draw order
/// is tx, ty, tz, rx, ry, rz. Deterministic given the seed; all-zero sigmas
/// return `gt` bit-for-bit.
pub fn perturb(gt: &RigidTransform, model: &PerturbationModel, seed: u64) -> RigidTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // σ = 0 collapses the distribution onto exactly 0.
    let draw = |rng: &mut ChaCha8Rng, sigma: f64| -> f64 {
        Normal::new(0.0, sigma).expect("sigma >= 0").sample(rng)
    };
    let tx = draw(&mut rng, model.sigma_t_xy);
    let ty = draw(&mut rng, model.sigma_t_xy);
    let tz = draw(&mut rng, model.sigma_t_z);
    let rx = draw(&mut rng, model.sigma_r_xy).to_radians();
    let ry = draw(&mut rng, model.sigma_r_xy).to_radians();
    let rz = draw(&mut rng, model.sigma_r_z).to_radians();
    let noise = RigidTransform::new(euler_xyz(rx, ry, rz), Vector3::new(tx, ty, tz));
    gt.compose(&noise)
}

/// How to derive a benchmark scene from a synthetic world.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSynthConfig {
    pub map_points: usize,
    pub scan_points: usize,
    pub n_sessions: u32,
    /// Sensor range for session scans, meters.
    pub max_range: f64,
    pub seed: u64,
}

impl Default for SceneSynthConfig {
    fn default() -> Self {
        Self { map_points: 40_000, scan_points: 2_500, n_sessions: 3, max_range: 30.0, seed: 0 }
    }
}

/// Builds a benchmark scene from a world: a dense world-frame map scan plus
/// one scan per session taken from a random sensor pose in the central half
/// of the map footprint. Ground truths are the sensor poses (scan frame →
/// world frame). Deterministic given the seed.
pub fn synthesize_scene(world: &SemanticWorld, cfg: &SceneSynthConfig) -> Result<BenchmarkScene> {
    if cfg.map_points == 0 || cfg.scan_points == 0 || cfg.n_sessions == 0 {
        return Err(Error::InvalidConfig("scene synthesis sizes must be > 0".into()));
    }
    // Range far beyond any in-budget world: the map covers everything.
    let map = simulate_scan(
        world,
        &RigidTransform::identity(),
        cfg.map_points,
        1.0e9,
        derive_seed(cfg.seed, 0),
    )?
    .cloud;
    let (lo, hi) = map.cloud.bounds().expect("map is non-empty");
    let center = (lo + hi) / 2.0;
    let span = hi - lo;

    let mut pose_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
    let mut scans = Vec::with_capacity(cfg.n_sessions as usize);
    let mut gts = Vec::with_capacity(cfg.n_sessions as usize);
    for session in 0..cfg.n_sessions {
        let x = center.x + pose_rng.random_range(-0.25..0.25) * span.x;
        let y = center.y + pose_rng.random_range(-0.25..0.25) * span.y;
        let yaw = pose_rng.random_range(0.0..std::f64::consts::TAU);
        let roll = pose_rng.random_range(-0.02..0.02);
        let pitch = pose_rng.random_range(-0.02..0.02);
        let pose = RigidTransform::new(
            euler_xyz(roll, pitch, yaw),
            Vector3::new(x, y, pose_rng.random_range(1.2..2.0)),
        );
        let scan = simulate_scan(
            world,
            &pose,
            cfg.scan_points,
            cfg.max_range,
            derive_seed(cfg.seed, 100 + session as u64),
        )?
        .cloud;
        scans.push((session, scan));
        gts.push(pose);
    }
    BenchmarkScene::new(map, scans, gts, center, DEFAULT_PRIOR_RADIUS)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub register: RegisterConfig,
    pub threshold: SuccessThreshold,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            register: RegisterConfig::default(),
            threshold: SuccessThreshold::default(),
            seed: 0,
        }
    }
}

/// Per-scan evaluation row. `rte`/`rre` are measured on the best transform
/// the pipeline produced (fine if ICP ran, else coarse); infinite when no
/// transform exists. `success` grades the coarse transform, `icp_success`
/// the refined one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanReport {
    pub scan_index: usize,
    pub session_id: u32,
    pub rte: f64,
    pub rre: f64,
    pub success: bool,
    pub icp_success: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneReport {
    pub scans: Vec<ScanReport>,
    /// Registration recall (%) of the coarse stage.
    pub recall: f64,
    /// Recall (%) after ICP refinement.
    pub icp_recall: f64,
    /// Mean/sample-std of rte/rre over scans that produced any transform.
    pub rte_mean: Option<f64>,
    pub rte_std: Option<f64>,
    pub rre_mean: Option<f64>,
    pub rre_std: Option<f64>,
}

/// Mean and sample standard deviation (N−1 denominator; 0 for a single
/// value). None on empty input.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

/// Registers every scan of the scene against its map and grades the results.
/// Scans are processed concurrently but reported in scan order; per-scan
/// seeds derive from `cfg.seed`, so the report is deterministic.
pub fn evaluate_scene(scene: &BenchmarkScene, cfg: &EvalConfig) -> SceneReport {
    evaluate_scene_detailed(scene, cfg).0
}

/// Transforms backing one report row, for callers that cache estimates
/// (recall curves over arbitrary thresholds need the poses, not the grades).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanEstimate {
    pub coarse: Option<RigidTransform>,
    pub fine: Option<RigidTransform>,
}

/// `evaluate_scene` plus the per-scan coarse/fine transforms, index-aligned
/// with the report rows.
pub fn evaluate_scene_detailed(
    scene: &BenchmarkScene,
    cfg: &EvalConfig,
) -> (SceneReport, Vec<ScanEstimate>) {
    let rows: Vec<(ScanReport, ScanEstimate)> = scene
        .scans
        .par_iter()
        .zip(&scene.ground_truths)
        .enumerate()
        .map(|(k, ((session_id, scan), gt))| {
            let mut rcfg = cfg.register;
            rcfg.seed = derive_seed(cfg.seed, k as u64);
            let out = register_pipeline(scan, &scene.map, &rcfg);
            let coarse = out.coarse.map(|(t, _)| t);
            let fine = out.icp.as_ref().map(|icp| icp.transform);
            let best = fine.or(coarse);
            let (e_t, e_r) = match &best {
                Some(t) => (rte(t, gt), rre(t, gt)),
                None => (f64::INFINITY, f64::INFINITY),
            };
            let report = ScanReport {
                scan_index: k,
                session_id: *session_id,
                rte: e_t,
                rre: e_r,
                success: coarse
                    .map(|t| cfg.threshold.is_success(&t, gt))
                    .unwrap_or(false),
                icp_success: fine
                    .map(|t| cfg.threshold.is_success(&t, gt))
                    .unwrap_or(false),
                error: out.error.map(|e| e.to_string()),
            };
            (report, ScanEstimate { coarse, fine })
        })
        .collect();
    let (reports, estimates): (Vec<ScanReport>, Vec<ScanEstimate>) = rows.into_iter().unzip();

    let n = reports.len() as f64;
    let recall = 100.0 * reports.iter().filter(|r| r.success).count() as f64 / n;
    let icp_recall = 100.0 * reports.iter().filter(|r| r.icp_success).count() as f64 / n;
    let finite_t: Vec<f64> = reports.iter().map(|r| r.rte).filter(|v| v.is_finite()).collect();
    let finite_r: Vec<f64> = reports.iter().map(|r| r.rre).filter(|v| v.is_finite()).collect();
    let (rte_mean, rte_std) = match mean_std(&finite_t) {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    };
    let (rre_mean, rre_std) = match mean_std(&finite_r) {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    };
    let report =
        SceneReport { scans: reports, recall, icp_recall, rte_mean, rte_std, rre_mean, rre_std };
    (report, estimates)
}
