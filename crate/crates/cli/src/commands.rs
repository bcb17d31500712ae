//! The seven subcommands. Every command is byte-reproducible given the same
//! inputs and seed, for any worker-thread count.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mapreg::io::{
    read_bundle, read_calibration, read_dpc, read_fmap, read_json, write_bundle, write_curve_csv,
    write_dpc, write_json, write_ply, write_report_csv, ManifestJson, MetaJson, PlacementJson,
    PoseJson, ResultJson,
};
use mapreg::metrics::RecallSample;
use mapreg::seeding::derive_seed;
use mapreg::{
    attach_descriptors, benchmark, build_scene, cluster_points, evaluate_scene_detailed, fit_pca,
    icp_refine, mean_std, query_similar, register_pipeline, remove_clusters_detailed, rre, rte,
    Aabb, CameraRig, ClusterConfig, DescriptorCloud, Error, EvalConfig, IcpConfig, RigidTransform,
    SceneReport, SemanticQueryConfig, WorldParams,
};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("{0}")]
    MissingInput(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CommandError {
    /// 2 missing or invalid input, 3 I/O failure, 4 algorithmic failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::MissingInput(_) => 2,
            Self::Core(err) => match err {
                Error::EmptyMap { .. } | Error::EmptyResult | Error::InvalidConfig(_) => 2,
                Error::Io { .. } | Error::Format { .. } => 3,
                _ => 4,
            },
        }
    }
}

fn missing(msg: impl Into<String>) -> CommandError {
    CommandError::MissingInput(msg.into())
}

/// Flag value, else config value, else a "flag is required" failure.
fn require_path(
    flag: Option<&PathBuf>,
    fallback: Option<&PathBuf>,
    name: &str,
) -> Result<PathBuf, CommandError> {
    flag.or(fallback)
        .cloned()
        .ok_or_else(|| missing(format!("{name} is required (flag or config file)")))
}

fn require_exists(path: &Path) -> Result<(), CommandError> {
    if path.exists() {
        Ok(())
    } else {
        Err(missing(format!("input not found: {}", path.display())))
    }
}

/// Accepts either a bundle directory (reads `map.dpc` inside) or a bare
/// `.dpc` file. Returns the map and the bundle directory when there is one.
fn load_map(path: &Path) -> Result<(DescriptorCloud, Option<PathBuf>), CommandError> {
    require_exists(path)?;
    if path.is_dir() {
        let map = read_dpc(path.join("map.dpc"))?;
        Ok((map, Some(path.to_path_buf())))
    } else {
        Ok((read_dpc(path)?, None))
    }
}

fn create_dir(path: &Path) -> Result<(), CommandError> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn parse_triple(text: &str, flag: &str) -> Result<Vector3<f64>, CommandError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| missing(format!("{flag} expects \"x,y,z\": {e}")))?;
    if parts.len() != 3 {
        return Err(missing(format!("{flag} expects exactly three numbers, got {}", parts.len())));
    }
    Ok(Vector3::new(parts[0], parts[1], parts[2]))
}

// ---------------------------------------------------------------------------
// build-map

#[derive(Args)]
pub struct BuildMapArgs {
    /// Keyframe directory: poses.json plus kf_*.dpc files, or kf_*.ply files
    /// with calibration.json and per-keyframe kf_*_cam_<k>.fmap feature maps.
    #[arg(long)]
    keyframes: Option<PathBuf>,
    /// Output bundle directory (map.dpc + meta.json).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Map center "x,y,z" (default: mean keyframe position).
    #[arg(long)]
    center: Option<String>,
    /// Keep keyframes within this radius of the center, meters.
    #[arg(long)]
    radius: Option<f64>,
    /// Minimum travel distance between kept keyframes, meters.
    #[arg(long, default_value_t = 2.0)]
    spacing: f64,
    /// Voxel edge for map downsampling, meters.
    #[arg(long)]
    voxel_size: Option<f64>,
}

pub fn build_map(cfg: &RunConfig, args: &BuildMapArgs) -> Result<(), CommandError> {
    let dir = require_path(args.keyframes.as_ref(), cfg.scans.as_ref(), "--keyframes")?;
    require_exists(&dir)?;
    let out = require_path(args.out.as_ref(), cfg.output.as_ref(), "--out")?;

    let poses_path = dir.join("poses.json");
    if !poses_path.is_file() {
        return Err(missing(format!("poses.json not found in {}", dir.display())));
    }
    let poses: Vec<PoseJson> = read_json(&poses_path)?;
    let keyframes = load_keyframes(&dir, cfg, &poses)?;

    let mut voxel = cfg.voxel;
    if let Some(size) = args.voxel_size {
        voxel.voxel_size = size;
    }
    let center = match &args.center {
        Some(text) => parse_triple(text, "--center")?,
        None => {
            let sum = keyframes
                .iter()
                .fold(Vector3::zeros(), |acc, (_, pose)| acc + pose.translation);
            sum / keyframes.len() as f64
        }
    };
    let radius = args.radius.unwrap_or(benchmark::DEFAULT_PRIOR_RADIUS);

    let input_points: usize = keyframes.iter().map(|(cloud, _)| cloud.len()).sum();
    let map = build_scene(&keyframes, &center, radius, args.spacing, &voxel)?;
    println!("keyframes: {} ({input_points} points)", keyframes.len());
    println!("map points after {} m voxel downsampling: {}", voxel.voxel_size, map.len());

    create_dir(&out)?;
    write_dpc(out.join("map.dpc"), &map)?;
    let meta = MetaJson {
        center: [center.x, center.y, center.z],
        prior_radius: radius,
        sessions: Vec::new(),
    };
    write_json(out.join("meta.json"), &meta)?;
    println!("wrote {}", out.display());
    Ok(())
}

/// Keyframe clouds in file-name order: descriptor clouds directly from
/// kf_*.dpc, or raw kf_*.ply geometry with descriptors attached through the
/// camera rig.
fn load_keyframes(
    dir: &Path,
    cfg: &RunConfig,
    poses: &[PoseJson],
) -> Result<Vec<(DescriptorCloud, RigidTransform)>, CommandError> {
    let list = |ext: &str| -> Result<Vec<PathBuf>, CommandError> {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|e| e == ext)
                    && p.file_stem().is_some_and(|s| s.to_string_lossy().starts_with("kf_"))
            })
            .collect();
        files.sort();
        Ok(files)
    };

    let dpc_files = list("dpc")?;
    let clouds: Vec<DescriptorCloud> = if !dpc_files.is_empty() {
        dpc_files.iter().map(read_dpc).collect::<Result<_, _>>()?
    } else {
        let ply_files = list("ply")?;
        if ply_files.is_empty() {
            return Err(missing(format!("no kf_*.dpc or kf_*.ply keyframes in {}", dir.display())));
        }
        let calibration_path = cfg
            .calibration
            .clone()
            .unwrap_or_else(|| dir.join("calibration.json"));
        if !calibration_path.is_file() {
            return Err(missing(format!(
                "calibration file not found: {} (required for .ply keyframes)",
                calibration_path.display()
            )));
        }
        let cameras = read_calibration(&calibration_path)?;
        let fmap_dir = cfg.feature_maps.clone().unwrap_or_else(|| dir.to_path_buf());
        let mut clouds = Vec::with_capacity(ply_files.len());
        for ply in &ply_files {
            let stem = ply.file_stem().unwrap().to_string_lossy().into_owned();
            let mut pairs = Vec::with_capacity(cameras.len());
            for (k, camera) in cameras.iter().enumerate() {
                let fmap_path = fmap_dir.join(format!("{stem}_cam_{k}.fmap"));
                if !fmap_path.is_file() {
                    return Err(missing(format!("feature map not found: {}", fmap_path.display())));
                }
                pairs.push((camera.clone(), read_fmap(&fmap_path)?));
            }
            let rig = CameraRig::new(pairs)?;
            let (points, _colors) = mapreg::io::read_ply(ply)?;
            clouds.push(attach_descriptors(&rig, &points)?);
        }
        clouds
    };

    if clouds.len() != poses.len() {
        return Err(CommandError::Core(Error::format(
            dir.join("poses.json"),
            format!("{} poses for {} keyframes", poses.len(), clouds.len()),
        )));
    }
    Ok(clouds.into_iter().zip(poses.iter().map(RigidTransform::from)).collect())
}

// ---------------------------------------------------------------------------
// register

#[derive(Args)]
pub struct RegisterArgs {
    /// Map bundle directory or .dpc file.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Scan .dpc file.
    #[arg(long)]
    scan: PathBuf,
    /// Output result JSON path.
    #[arg(long, default_value = "result.json")]
    out: PathBuf,
    /// Ground-truth pose JSON; enables RTE/RRE reporting.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Skip matching and RANSAC; ICP-refine from the --truth pose with a
    /// tight configuration (ground-truth refinement pass).
    #[arg(long)]
    icp_only: bool,
    /// Scan reduction factor before matching.
    #[arg(long)]
    downsample_factor: Option<usize>,
    /// Similarity gate for correspondences.
    #[arg(long)]
    cos_threshold: Option<f64>,
    /// RANSAC inlier threshold, meters.
    #[arg(long)]
    inlier_threshold: Option<f64>,
    /// RANSAC iteration count.
    #[arg(long)]
    iterations: Option<usize>,
}

/// ICP settings for the ground-truth refinement pass: near-range
/// associations only, generous iteration budget, strict convergence.
fn tight_icp(base: &IcpConfig) -> IcpConfig {
    IcpConfig {
        max_correspondence_distance: base.max_correspondence_distance.min(0.5),
        max_iterations: base.max_iterations.max(200),
        convergence_delta: base.convergence_delta.min(1e-9),
    }
}

pub fn register(cfg: &RunConfig, args: &RegisterArgs) -> Result<(), CommandError> {
    let map_path = require_path(args.map.as_ref(), cfg.map.as_ref(), "--map")?;
    let (map, _) = load_map(&map_path)?;
    require_exists(&args.scan)?;
    let scan = read_dpc(&args.scan)?;
    let truth: Option<RigidTransform> = match &args.truth {
        Some(path) => {
            require_exists(path)?;
            let pose: PoseJson = read_json(path)?;
            Some((&pose).into())
        }
        None => None,
    };

    if args.icp_only {
        let init = truth
            .ok_or_else(|| missing("--icp-only needs --truth as the initial pose"))?;
        let icp_cfg = tight_icp(&cfg.icp);
        let refined = icp_refine(&scan.cloud, &map.cloud, &init, &icp_cfg);
        let json = match &refined {
            Ok(icp) => ResultJson {
                correspondences: 0,
                coarse: None,
                inlier_count: None,
                fine: Some((&icp.transform).into()),
                icp_rmse: Some(icp.rmse),
                icp_iterations: Some(icp.iterations),
                converged: icp.converged,
                error: None,
                rte: None,
                rre: None,
            },
            Err(err) => ResultJson {
                correspondences: 0,
                coarse: None,
                inlier_count: None,
                fine: None,
                icp_rmse: None,
                icp_iterations: None,
                converged: false,
                error: Some(err.to_string()),
                rte: None,
                rre: None,
            },
        };
        write_json(&args.out, &json)?;
        let icp = refined?;
        println!(
            "refined pose moved {:.6} m / {:.6} deg from the initial pose (rmse {:.6} m, {} iterations)",
            rte(&icp.transform, &init),
            rre(&icp.transform, &init),
            icp.rmse,
            icp.iterations
        );
        println!("wrote {}", args.out.display());
        return Ok(());
    }

    let mut rcfg = cfg.register_config();
    if let Some(v) = args.downsample_factor {
        rcfg.downsample_factor = v;
    }
    if let Some(v) = args.cos_threshold {
        rcfg.matching.cos_threshold = v;
    }
    if let Some(v) = args.inlier_threshold {
        rcfg.ransac.inlier_threshold = v;
    }
    if let Some(v) = args.iterations {
        rcfg.ransac.iterations = v;
    }

    let outcome = register_pipeline(&scan, &map, &rcfg);
    let mut json = ResultJson::from(&outcome);
    let best = outcome
        .icp
        .as_ref()
        .map(|icp| icp.transform)
        .or(outcome.coarse.map(|(t, _)| t));
    if let (Some(gt), Some(pose)) = (&truth, &best) {
        json.rte = Some(rte(pose, gt));
        json.rre = Some(rre(pose, gt));
    }
    write_json(&args.out, &json)?;
    if let Some(err) = outcome.error {
        return Err(err.into());
    }
    println!("correspondences: {}", outcome.correspondences);
    if let Some((_, inliers)) = outcome.coarse {
        println!("consensus inliers: {inliers}");
    }
    if let Some(icp) = &outcome.icp {
        println!(
            "icp: rmse {:.6} m, {} iterations, converged: {}",
            icp.rmse, icp.iterations, icp.converged
        );
    }
    if let (Some(t), Some(r)) = (json.rte, json.rre) {
        println!("rte: {t:.6} m");
        println!("rre: {r:.6} deg");
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// benchmark

#[derive(Args)]
pub struct BenchmarkArgs {
    /// Directory containing scene-bundle subdirectories.
    #[arg(long)]
    scenes: Option<PathBuf>,
    /// Output directory for report.csv, report.json, pairs.json, curve.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recall-curve sample count over strictness in [0, 1].
    #[arg(long, default_value_t = 21)]
    steps: usize,
    /// Scan reduction factor before matching.
    #[arg(long)]
    downsample_factor: Option<usize>,
    /// RANSAC inlier threshold, meters.
    #[arg(long)]
    inlier_threshold: Option<f64>,
}

/// One cached (ground truth, estimates) row; the raw material of any recall
/// computation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairJson {
    pub scene: String,
    pub session: u32,
    pub gt: PoseJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse: Option<PoseJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine: Option<PoseJson>,
}

#[derive(Serialize)]
struct AggregateJson {
    scenes: usize,
    scans: usize,
    recall: f64,
    icp_recall: f64,
    rte_mean: Option<f64>,
    rte_std: Option<f64>,
    rre_mean: Option<f64>,
    rre_std: Option<f64>,
}

#[derive(Serialize)]
struct SceneEntryJson {
    name: String,
    report: SceneReport,
}

#[derive(Serialize)]
struct ReportJson {
    seed: u64,
    rte_success_max: f64,
    rre_success_max: f64,
    aggregate: AggregateJson,
    scenes: Vec<SceneEntryJson>,
}

pub fn benchmark(cfg: &RunConfig, args: &BenchmarkArgs) -> Result<(), CommandError> {
    let scenes_dir = require_path(args.scenes.as_ref(), cfg.scans.as_ref(), "--scenes")?;
    require_exists(&scenes_dir)?;
    let out = require_path(args.out.as_ref(), cfg.output.as_ref(), "--out")?;

    let mut bundles: Vec<(String, PathBuf)> = fs::read_dir(&scenes_dir)
        .map_err(|e| Error::io(&scenes_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("meta.json").is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), p))
        .collect();
    bundles.sort();
    if bundles.is_empty() {
        return Err(missing(format!("no scene bundles under {}", scenes_dir.display())));
    }

    let mut rcfg = cfg.register_config();
    if let Some(v) = args.downsample_factor {
        rcfg.downsample_factor = v;
    }
    if let Some(v) = args.inlier_threshold {
        rcfg.ransac.inlier_threshold = v;
    }
    let ecfg = EvalConfig { register: rcfg, threshold: cfg.threshold, seed: cfg.seed };

    let mut reports: Vec<(String, SceneReport)> = Vec::with_capacity(bundles.len());
    let mut pairs: Vec<PairJson> = Vec::new();
    println!("{:<16} {:>8} {:>9} {:>7} {:>9}", "scene", "RTE[m]", "RRE[deg]", "RR[%]", "ICP-RR[%]");
    for (name, dir) in &bundles {
        let scene = read_bundle(dir)?;
        let (report, estimates) = evaluate_scene_detailed(&scene, &ecfg);
        for (row, est) in report.scans.iter().zip(&estimates) {
            pairs.push(PairJson {
                scene: name.clone(),
                session: row.session_id,
                gt: (&scene.ground_truths[row.scan_index]).into(),
                coarse: est.coarse.as_ref().map(Into::into),
                fine: est.fine.as_ref().map(Into::into),
            });
        }
        print_table_row(name, &report);
        reports.push((name.clone(), report));
    }

    let all_rows: Vec<&mapreg::ScanReport> =
        reports.iter().flat_map(|(_, r)| r.scans.iter()).collect();
    let n = all_rows.len() as f64;
    let recall = 100.0 * all_rows.iter().filter(|r| r.success).count() as f64 / n;
    let icp_recall = 100.0 * all_rows.iter().filter(|r| r.icp_success).count() as f64 / n;
    let finite_t: Vec<f64> = all_rows.iter().map(|r| r.rte).filter(|v| v.is_finite()).collect();
    let finite_r: Vec<f64> = all_rows.iter().map(|r| r.rre).filter(|v| v.is_finite()).collect();
    let (rte_mean, rte_std) = split(mean_std(&finite_t));
    let (rre_mean, rre_std) = split(mean_std(&finite_r));
    let aggregate = AggregateJson {
        scenes: reports.len(),
        scans: all_rows.len(),
        recall,
        icp_recall,
        rte_mean,
        rte_std,
        rre_mean,
        rre_std,
    };
    println!(
        "{:<16} {:>8} {:>9} {:>7.1} {:>9.1}",
        "overall",
        rte_mean.map_or("-".into(), |v| format!("{v:.4}")),
        rre_mean.map_or("-".into(), |v| format!("{v:.4}")),
        recall,
        icp_recall
    );

    create_dir(&out)?;
    write_report_csv(out.join("report.csv"), &reports)?;
    let report_json = ReportJson {
        seed: cfg.seed,
        rte_success_max: cfg.threshold.rte_max,
        rre_success_max: cfg.threshold.rre_max,
        aggregate,
        scenes: reports
            .into_iter()
            .map(|(name, report)| SceneEntryJson { name, report })
            .collect(),
    };
    write_json(out.join("report.json"), &report_json)?;
    write_json(out.join("pairs.json"), &pairs)?;
    let curve = curve_from_pairs(&pairs, Stage::Coarse, args.steps);
    write_curve_csv(out.join("curve.csv"), &curve)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn split(pair: Option<(f64, f64)>) -> (Option<f64>, Option<f64>) {
    match pair {
        Some((m, s)) => (Some(m), Some(s)),
        None => (None, None),
    }
}

fn print_table_row(name: &str, report: &SceneReport) {
    println!(
        "{:<16} {:>8} {:>9} {:>7.1} {:>9.1}",
        name,
        report.rte_mean.map_or("-".into(), |v| format!("{v:.4}")),
        report.rre_mean.map_or("-".into(), |v| format!("{v:.4}")),
        report.recall,
        report.icp_recall
    );
}

// ---------------------------------------------------------------------------
// recall-curve

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    /// Consensus transform before refinement.
    Coarse,
    /// ICP-refined transform.
    Fine,
}

#[derive(Args)]
pub struct RecallCurveArgs {
    /// pairs.json written by the benchmark command.
    #[arg(long)]
    pairs: PathBuf,
    /// Output CSV path.
    #[arg(long, default_value = "curve.csv")]
    out: PathBuf,
    /// Sample count over strictness in [0, 1].
    #[arg(long, default_value_t = 21)]
    steps: usize,
    /// Which estimate the curve grades.
    #[arg(long, value_enum, default_value_t = Stage::Coarse)]
    stage: Stage,
}

/// Registrations that produced no transform must fail at every threshold;
/// an estimate displaced far beyond any reachable threshold encodes that.
const FAR_MISS: f64 = 1e9;

fn curve_from_pairs(pairs: &[PairJson], stage: Stage, steps: usize) -> Vec<RecallSample> {
    let pose_pairs: Vec<(RigidTransform, RigidTransform)> = pairs
        .iter()
        .map(|p| {
            let gt: RigidTransform = (&p.gt).into();
            let est = match stage {
                Stage::Coarse => p.coarse.as_ref(),
                Stage::Fine => p.fine.as_ref(),
            };
            let est = est.map(RigidTransform::from).unwrap_or_else(|| {
                RigidTransform::new(gt.rotation, gt.translation + Vector3::new(FAR_MISS, 0.0, 0.0))
            });
            (gt, est)
        })
        .collect();
    mapreg::recall_curve(&pose_pairs, (0.0, 1.0), steps.max(2))
}

pub fn recall_curve(_cfg: &RunConfig, args: &RecallCurveArgs) -> Result<(), CommandError> {
    require_exists(&args.pairs)?;
    let pairs: Vec<PairJson> = read_json(&args.pairs)?;
    let curve = curve_from_pairs(&pairs, args.stage, args.steps);
    write_curve_csv(&args.out, &curve)?;
    println!("wrote {} ({} samples over {} pairs)", args.out.display(), curve.len(), pairs.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// perturb-map

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EditMode {
    /// Drop whole clusters with the given probability.
    Remove,
    /// Duplicate donor clusters at random ground positions.
    Insert,
}

#[derive(Args)]
pub struct PerturbMapArgs {
    /// Scene bundle directory or bare map .dpc file.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Output bundle directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: EditMode,
    /// Map index of the operator-chosen exemplar point.
    #[arg(long)]
    exemplar: Option<usize>,
    /// Max Euclidean RGB distance from the exemplar color.
    #[arg(long)]
    color_distance: Option<f64>,
    /// Cluster neighborhood radius, meters.
    #[arg(long)]
    eps: Option<f64>,
    /// Minimum neighbors for a cluster core point.
    #[arg(long)]
    min_points: Option<usize>,
    /// Per-cluster removal probability (remove mode).
    #[arg(long, default_value_t = 0.5)]
    probability: f64,
    /// Number of objects to insert (insert mode).
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Insertion region "x0,y0,x1,y1" (default: map footprint).
    #[arg(long)]
    region: Option<String>,
}

pub fn perturb_map(cfg: &RunConfig, args: &PerturbMapArgs) -> Result<(), CommandError> {
    let input = require_path(args.bundle.as_ref(), cfg.map.as_ref(), "--bundle")?;
    let out = require_path(args.out.as_ref(), cfg.output.as_ref(), "--out")?;
    let (map, bundle_dir) = load_map(&input)?;

    let exemplar = args
        .exemplar
        .ok_or_else(|| missing("--exemplar (map index of the chosen point) is required"))?;
    let query_defaults = SemanticQueryConfig::default();
    let cluster_defaults = ClusterConfig::default();
    let query_cfg = SemanticQueryConfig {
        seed_point_index: exemplar,
        color_distance_max: args.color_distance.unwrap_or(query_defaults.color_distance_max),
    };
    let cluster_cfg = ClusterConfig {
        eps: args.eps.unwrap_or(cluster_defaults.eps),
        min_points: args.min_points.unwrap_or(cluster_defaults.min_points),
    };
    cluster_cfg.validate()?;

    let pca = fit_pca(&map, cfg.seed)?;
    let indices = query_similar(&map, &pca, &query_cfg)?;
    let (clusters, noise) = cluster_points(&map, &indices, &cluster_cfg);
    println!(
        "query matched {} points -> {} clusters ({} noise points)",
        indices.len(),
        clusters.len(),
        noise.len()
    );

    let (edited, manifest) = match args.mode {
        EditMode::Remove => {
            let (edited, removed) =
                remove_clusters_detailed(&map, &clusters, args.probability, derive_seed(cfg.seed, 1))?;
            let removed_points: usize = removed.iter().map(|&c| clusters[c].len()).sum();
            println!(
                "removed {} of {} clusters ({} points)",
                removed.len(),
                clusters.len(),
                removed_points
            );
            let manifest = ManifestJson {
                mode: "remove".into(),
                seed: cfg.seed,
                exemplar_index: Some(exemplar),
                color_distance_max: Some(query_cfg.color_distance_max),
                eps: Some(cluster_cfg.eps),
                min_points: Some(cluster_cfg.min_points),
                removal_probability: Some(args.probability),
                clusters_found: clusters.len(),
                removed_clusters: removed,
                removed_points,
                placements: Vec::new(),
            };
            (edited, manifest)
        }
        EditMode::Insert => {
            let donors: Vec<DescriptorCloud> =
                clusters.iter().map(|c| map.select(c)).collect();
            let region = match &args.region {
                Some(text) => parse_region(text)?,
                None => map_footprint(&map)?,
            };
            let (edited, placements) =
                mapreg::insert_objects_detailed(&map, &donors, args.count, &region, derive_seed(cfg.seed, 2))?;
            println!("inserted {} objects from {} donor clusters", placements.len(), donors.len());
            let manifest = ManifestJson {
                mode: "insert".into(),
                seed: cfg.seed,
                exemplar_index: Some(exemplar),
                color_distance_max: Some(query_cfg.color_distance_max),
                eps: Some(cluster_cfg.eps),
                min_points: Some(cluster_cfg.min_points),
                removal_probability: None,
                clusters_found: clusters.len(),
                removed_clusters: Vec::new(),
                removed_points: 0,
                placements: placements
                    .iter()
                    .map(|p| PlacementJson {
                        donor: p.donor,
                        position: [p.position.x, p.position.y, p.position.z],
                    })
                    .collect(),
            };
            (edited, manifest)
        }
    };

    create_dir(&out)?;
    write_dpc(out.join("map.dpc"), &edited)?;
    write_json(out.join("manifest.json"), &manifest)?;
    if let Some(src) = bundle_dir {
        copy_bundle_siblings(&src, &out)?;
    }
    println!("map points: {} -> {}", map.len(), edited.len());
    println!("wrote {}", out.display());
    Ok(())
}

fn parse_region(text: &str) -> Result<Aabb, CommandError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| missing(format!("--region expects \"x0,y0,x1,y1\": {e}")))?;
    if parts.len() != 4 {
        return Err(missing(format!(
            "--region expects exactly four numbers, got {}",
            parts.len()
        )));
    }
    let region = Aabb {
        min: Vector3::new(parts[0].min(parts[2]), parts[1].min(parts[3]), 0.0),
        max: Vector3::new(parts[0].max(parts[2]), parts[1].max(parts[3]), 0.0),
    };
    region.validate()?;
    Ok(region)
}

fn map_footprint(map: &DescriptorCloud) -> Result<Aabb, CommandError> {
    let (lo, hi) = map
        .cloud
        .bounds()
        .ok_or_else(|| missing("map is empty; cannot derive an insertion region"))?;
    Ok(Aabb { min: lo, max: hi })
}

/// Byte-copies everything that makes the edited map a complete bundle.
fn copy_bundle_siblings(src: &Path, out: &Path) -> Result<(), CommandError> {
    let mut names: Vec<String> = fs::read_dir(src)
        .map_err(|e| Error::io(src, e))?
        .filter_map(|entry| entry.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|name| {
            name == "gt.json"
                || name == "meta.json"
                || (name.starts_with("scan_") && name.ends_with(".dpc"))
        })
        .collect();
    names.sort();
    for name in names {
        fs::copy(src.join(&name), out.join(&name))
            .map_err(|e| Error::io(src.join(&name), e))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// colorize

#[derive(Args)]
pub struct ColorizeArgs {
    /// Scene bundle directory or bare map .dpc file.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Output directory for the colorized PLY files.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn colorize(cfg: &RunConfig, args: &ColorizeArgs) -> Result<(), CommandError> {
    let input = require_path(args.bundle.as_ref(), cfg.map.as_ref(), "--bundle")?;
    let out = require_path(args.out.as_ref(), cfg.output.as_ref(), "--out")?;
    let (map, bundle_dir) = load_map(&input)?;

    let pca = fit_pca(&map, cfg.seed)?;
    create_dir(&out)?;
    let colors = pca.colorize(&map);
    write_ply(out.join("map.ply"), &map.cloud, Some(&colors))?;
    println!("map.ply: {} points", map.len());

    if let Some(dir) = bundle_dir {
        let mut scans: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .is_some_and(|n| {
                        let n = n.to_string_lossy();
                        n.starts_with("scan_") && n.ends_with(".dpc")
                    })
            })
            .collect();
        scans.sort();
        for scan_path in scans {
            let scan = read_dpc(&scan_path)?;
            if scan.dim() != pca.dim() {
                return Err(CommandError::Core(Error::DimMismatch {
                    expected: pca.dim(),
                    got: scan.dim(),
                }));
            }
            let colors = pca.colorize(&scan);
            let name = scan_path.file_stem().unwrap().to_string_lossy().into_owned();
            write_ply(out.join(format!("{name}.ply")), &scan.cloud, Some(&colors))?;
            println!("{name}.ply: {} points", scan.len());
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// synth-world

#[derive(Args)]
pub struct SynthWorldArgs {
    /// Output directory; one scene_<k> bundle per scene.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of scene bundles to generate.
    #[arg(long, default_value_t = 1)]
    scenes: usize,
    /// Map point budget per scene.
    #[arg(long)]
    map_points: Option<usize>,
    /// Points per session scan.
    #[arg(long)]
    scan_points: Option<usize>,
    /// Session scans per scene.
    #[arg(long)]
    sessions: Option<u32>,
    /// Sensor range for session scans, meters.
    #[arg(long)]
    max_range: Option<f64>,
    /// World footprint side length, meters.
    #[arg(long)]
    extent: Option<f64>,
    /// Ground tile edge, meters.
    #[arg(long)]
    tile_size: Option<f64>,
    #[arg(long)]
    buildings: Option<usize>,
    #[arg(long)]
    cars: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    /// Descriptor dimensionality.
    #[arg(long)]
    descriptor_dim: Option<usize>,
    /// Descriptor noise standard deviation.
    #[arg(long)]
    noise_sigma: Option<f64>,
}

#[derive(Serialize)]
struct SynthManifestJson {
    seed: u64,
    scenes: usize,
    world: WorldParams,
    scene: benchmark::SceneSynthConfig,
}

pub fn synth_world(cfg: &RunConfig, args: &SynthWorldArgs) -> Result<(), CommandError> {
    let out = require_path(args.out.as_ref(), cfg.output.as_ref(), "--out")?;
    if args.scenes == 0 {
        return Err(missing("--scenes must be at least 1"));
    }

    let defaults = WorldParams::default();
    let world_params = WorldParams {
        extent: args.extent.unwrap_or(defaults.extent),
        tile_size: args.tile_size.unwrap_or(defaults.tile_size),
        n_buildings: args.buildings.unwrap_or(defaults.n_buildings),
        n_cars: args.cars.unwrap_or(defaults.n_cars),
        n_trees: args.trees.unwrap_or(defaults.n_trees),
        descriptor_dim: args.descriptor_dim.unwrap_or(defaults.descriptor_dim),
        noise_sigma: args.noise_sigma.unwrap_or(defaults.noise_sigma),
    };
    let scene_defaults = benchmark::SceneSynthConfig::default();
    let scene_cfg = benchmark::SceneSynthConfig {
        map_points: args.map_points.unwrap_or(scene_defaults.map_points),
        scan_points: args.scan_points.unwrap_or(scene_defaults.scan_points),
        n_sessions: args.sessions.unwrap_or(scene_defaults.n_sessions),
        max_range: args.max_range.unwrap_or(scene_defaults.max_range),
        seed: 0,
    };

    create_dir(&out)?;
    for k in 0..args.scenes {
        let world = mapreg::generate_world(&world_params, derive_seed(cfg.seed, k as u64))?;
        let cfg_k = benchmark::SceneSynthConfig {
            seed: derive_seed(cfg.seed, 1_000_000 + k as u64),
            ..scene_cfg
        };
        let scene = benchmark::synthesize_scene(&world, &cfg_k)?;
        let dir = out.join(format!("scene_{k:03}"));
        write_bundle(&dir, &scene)?;
        println!(
            "scene_{k:03}: map {} points, {} sessions x {} points",
            scene.map.len(),
            scene.scans.len(),
            cfg_k.scan_points
        );
    }
    let manifest = SynthManifestJson {
        seed: cfg.seed,
        scenes: args.scenes,
        world: world_params,
        scene: scene_cfg,
    };
    write_json(out.join("manifest.json"), &manifest)?;
    println!("wrote {}", out.display());
    Ok(())
}
