use nalgebra::Vector3;
use rayon::prelude::*;

use crate::cloud::{DescriptorCloud, PointCloud};
use crate::error::{Error, Result};
use crate::transform::RigidTransform;

/// Near-plane cutoff: camera-frame points at z at or below this are not
/// projected.
pub const Z_MIN: f64 = 0.1;

/// Pinhole camera (no distortion) with a LiDAR→camera extrinsic.
#[derive(Clone, Debug)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Maps LiDAR-frame points into the camera frame.
    pub extrinsic: RigidTransform,
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "focal lengths must be positive and finite, got fx {} fy {}",
                self.fx, self.fy
            )));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::InvalidConfig("principal point must be finite".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig(format!(
                "image size must be positive, got {}×{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Continuous pixel coordinates and camera-frame depth of a LiDAR-frame
    /// point, or `None` when behind the near plane or outside the image.
    pub fn project_real(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let q = self.extrinsic.apply_point(p);
        if q.z <= Z_MIN {
            return None;
        }
        let u = self.fx * q.x / q.z + self.cx;
        let v = self.fy * q.y / q.z + self.cy;
        if u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64 {
            Some((u, v, q.z))
        } else {
            None
        }
    }

    /// Integer pixel (column, row) hit by the point: the continuous
    /// projection floored to its containing pixel cell.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(u32, u32)> {
        self.project_real(p).map(|(u, v, _)| (u.floor() as u32, v.floor() as u32))
    }

    /// LiDAR-frame point on the ray through continuous pixel (u, v) at
    /// camera-frame depth `depth`.
    pub fn back_project(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        let q = Vector3::new(
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        );
        self.extrinsic.inverse().apply_point(&q)
    }
}

/// Dense per-pixel descriptor grid at feature resolution.
#[derive(Clone, Debug)]
pub struct FeatureMap {
    height: u32,
    width: u32,
    dim: u32,
    /// Image-pixel-to-feature-cell ratio.
    scale: f32,
    /// Row-major height × width × dim.
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(height: u32, width: u32, dim: u32, scale: f32, data: Vec<f32>) -> Result<Self> {
        let expected = height as usize * width as usize * dim as usize;
        if data.len() != expected {
            return Err(Error::DimMismatch { expected, got: data.len() });
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "feature scale must be positive and finite, got {scale}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidConfig("feature dim must be > 0".into()));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "feature map contains non-finite value {bad}"
            )));
        }
        Ok(Self { height, width, dim, scale, data })
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn scale(&self) -> f32 {
        self.scale
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Descriptor at feature cell (row, col).
    pub fn cell(&self, row: u32, col: u32) -> &[f32] {
        assert!(row < self.height && col < self.width, "cell out of range");
        let start = (row as usize * self.width as usize + col as usize) * self.dim as usize;
        &self.data[start..start + self.dim as usize]
    }

    /// Feature cell containing an integer image pixel (column, row), if the
    /// cell lies inside the grid. The image may be slightly larger than
    /// `scale` × grid (e.g. patch grids that do not divide the image), so
    /// edge pixels can fall outside.
    fn cell_of_pixel(&self, u: u32, v: u32) -> Option<(u32, u32)> {
        let col = (u as f32 / self.scale).floor() as u32;
        let row = (v as f32 / self.scale).floor() as u32;
        (row < self.height && col < self.width).then_some((row, col))
    }
}

/// Ordered surround-view cameras with their feature maps.
#[derive(Clone, Debug)]
pub struct CameraRig {
    cameras: Vec<(CameraModel, FeatureMap)>,
}

impl CameraRig {
    pub fn new(cameras: Vec<(CameraModel, FeatureMap)>) -> Result<Self> {
        let dim = match cameras.first() {
            Some((_, f)) => f.dim(),
            None => return Err(Error::InvalidConfig("camera rig is empty".into())),
        };
        for (cam, feat) in &cameras {
            cam.validate()?;
            if feat.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim as usize,
                    got: feat.dim() as usize,
                });
            }
        }
        Ok(Self { cameras })
    }

    pub fn cameras(&self) -> &[(CameraModel, FeatureMap)] {
        &self.cameras
    }

    pub fn dim(&self) -> u32 {
        self.cameras[0].1.dim()
    }
}

/// Attaches to each point the descriptor read from the first camera (in rig
/// order) that both sees the point and maps its pixel into the feature grid.
/// Points visible in no camera are dropped.
pub fn attach_descriptors(rig: &CameraRig, c: &PointCloud) -> Result<DescriptorCloud> {
    let dim = rig.dim() as usize;
    let rows: Vec<Option<(Vector3<f64>, &[f32])>> = c
        .points
        .par_iter()
        .map(|p| {
            for (cam, feat) in rig.cameras() {
                if let Some((u, v)) = cam.project(p) {
                    if let Some((row, col)) = feat.cell_of_pixel(u, v) {
                        return Some((*p, feat.cell(row, col)));
                    }
                }
            }
            None
        })
        .collect();
    let mut points = Vec::new();
    let mut descriptors = Vec::new();
    for entry in rows.into_iter().flatten() {
        points.push(entry.0);
        descriptors.extend_from_slice(entry.1);
    }
    if points.is_empty() {
        return Err(Error::EmptyResult);
    }
    DescriptorCloud::new(PointCloud::new(points), descriptors, dim)
}
