//! Scan-to-map registration for LiDAR point clouds carrying per-point
//! feature descriptors, plus the synthetic-world benchmark tooling around it.
//!
//! The pipeline: cosine-similarity descriptor matching → 3-point RANSAC for a
//! coarse rigid pose → point-to-point ICP refinement. Supporting modules
//! cover map assembly, evaluation metrics and protocols, descriptor-space
//! map editing, camera-to-cloud descriptor attachment, and file formats.

pub mod benchmark;
pub mod cloud;
pub mod downsample;
pub mod error;
pub mod io;
pub mod kabsch;
pub mod matching;
pub mod metrics;
pub mod pca;
pub mod projection;
pub mod registration;
pub mod robustness;
pub mod seeding;
pub mod spatial;
pub mod synth;
pub mod transform;

pub use benchmark::{
    build_scene, evaluate_scene, evaluate_scene_detailed, mean_std, perturb, BenchmarkScene,
    EvalConfig, PerturbationModel, ScanEstimate, ScanReport, SceneReport,
};
pub use cloud::{DescriptorCloud, PointCloud, VoxelGridParams};
pub use error::{Error, Result};
pub use kabsch::align_kabsch;
pub use matching::{match_descriptors, normalize_descriptors, Correspondence, MatchConfig};
pub use metrics::{recall_curve, registration_recall, rre, rte, SuccessThreshold};
pub use pca::{fit_pca, PcaColorizer};
pub use projection::{attach_descriptors, CameraModel, CameraRig, FeatureMap};
pub use registration::{
    icp_refine, ransac_align, register, register_pipeline, IcpConfig, IcpOutcome,
    RansacConfig, RegisterConfig, RegistrationResult,
};
pub use robustness::{
    cluster_points, insert_objects, insert_objects_detailed, query_similar,
    remove_clusters, remove_clusters_detailed, Aabb, ClusterConfig, Placement,
    SemanticQueryConfig,
};
pub use synth::{generate_world, simulate_scan, LabeledScan, SemanticWorld, WorldParams};
pub use transform::RigidTransform;
