//! JSON sidecar shapes: rigid poses, camera calibration, bundle metadata,
//! registration results, and map-edit manifests.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::CameraModel;
use crate::registration::PipelineOutcome;
use crate::transform::RigidTransform;

/// Rigid transform as 9 row-major rotation floats plus a translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseJson {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl From<&RigidTransform> for PoseJson {
    fn from(t: &RigidTransform) -> Self {
        let r = &t.rotation;
        Self {
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl From<&PoseJson> for RigidTransform {
    fn from(p: &PoseJson) -> Self {
        RigidTransform::new(
            nalgebra::Matrix3::from_row_slice(&p.rotation),
            nalgebra::Vector3::new(p.translation[0], p.translation[1], p.translation[2]),
        )
    }
}

/// One camera of a calibration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CameraJson {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub extrinsic: PoseJson,
}

impl From<&CameraJson> for CameraModel {
    fn from(c: &CameraJson) -> Self {
        CameraModel {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            extrinsic: (&c.extrinsic).into(),
        }
    }
}

impl From<&CameraModel> for CameraJson {
    fn from(c: &CameraModel) -> Self {
        CameraJson {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            extrinsic: (&c.extrinsic).into(),
        }
    }
}

/// Scene-bundle metadata: map center, place-recognition prior radius, and
/// the session id of each scan file in index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaJson {
    pub center: [f64; 3],
    pub prior_radius: f64,
    pub sessions: Vec<u32>,
}

/// Registration output, including partial results when a stage failed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultJson {
    pub correspondences: usize,
    pub coarse: Option<PoseJson>,
    pub inlier_count: Option<usize>,
    pub fine: Option<PoseJson>,
    pub icp_rmse: Option<f64>,
    pub icp_iterations: Option<usize>,
    pub converged: bool,
    pub error: Option<String>,
    /// Filled only when ground truth was supplied.
    pub rte: Option<f64>,
    pub rre: Option<f64>,
}

impl From<&PipelineOutcome> for ResultJson {
    fn from(out: &PipelineOutcome) -> Self {
        Self {
            correspondences: out.correspondences,
            coarse: out.coarse.as_ref().map(|(t, _)| t.into()),
            inlier_count: out.coarse.as_ref().map(|&(_, n)| n),
            fine: out.icp.as_ref().map(|icp| (&icp.transform).into()),
            icp_rmse: out.icp.as_ref().map(|icp| icp.rmse),
            icp_iterations: out.icp.as_ref().map(|icp| icp.iterations),
            converged: out.icp.as_ref().is_some_and(|icp| icp.converged),
            error: out.error.as_ref().map(|e| e.to_string()),
            rte: None,
            rre: None,
        }
    }
}

/// One inserted object: donor index and the sampled anchor position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementJson {
    pub donor: usize,
    pub position: [f64; 3],
}

/// Record of a map edit: what was queried, clustered, and removed/inserted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestJson {
    pub mode: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplar_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color_distance_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removal_probability: Option<f64>,
    pub clusters_found: usize,
    #[serde(default)]
    pub removed_clusters: Vec<usize>,
    pub removed_points: usize,
    #[serde(default)]
    pub placements: Vec<PlacementJson>,
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a calibration file: a JSON array of cameras, each validated.
pub fn read_calibration(path: impl AsRef<Path>) -> Result<Vec<CameraModel>> {
    let cams: Vec<CameraJson> = read_json(&path)?;
    let models: Vec<CameraModel> = cams.iter().map(CameraModel::from).collect();
    for m in &models {
        m.validate()?;
    }
    Ok(models)
}
