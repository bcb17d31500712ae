use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bare 3-D point set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let mut sum = Vector3::zeros();
        for p in &self.points {
            sum += p;
        }
        Some(sum / self.points.len() as f64)
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = *self.points.first()?;
        let mut lo = first;
        let mut hi = first;
        for p in &self.points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Some((lo, hi))
    }
}

/// Point set with one row-major `f32` descriptor row per point.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorCloud {
    pub cloud: PointCloud,
    descriptors: Vec<f32>,
    dim: usize,
}

impl DescriptorCloud {
    /// `descriptors` is row-major `len(points) × dim`. Points whose descriptor
    /// row is entirely zero (no valid descriptor) are dropped, so every stored
    /// descriptor is nonzero.
    pub fn new(cloud: PointCloud, descriptors: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("descriptor dimension must be > 0".into()));
        }
        let expected = cloud.len() * dim;
        if descriptors.len() != expected {
            return Err(Error::DimMismatch { expected, got: descriptors.len() });
        }
        let any_zero_row = descriptors
            .chunks_exact(dim.max(1))
            .any(|row| row.iter().all(|&v| v == 0.0));
        if !any_zero_row {
            return Ok(Self { cloud, descriptors, dim });
        }
        let mut kept_points = Vec::with_capacity(cloud.len());
        let mut kept_desc = Vec::with_capacity(descriptors.len());
        for (i, row) in descriptors.chunks_exact(dim).enumerate() {
            if row.iter().any(|&v| v != 0.0) {
                kept_points.push(cloud.points[i]);
                kept_desc.extend_from_slice(row);
            }
        }
        Ok(Self { cloud: PointCloud::new(kept_points), descriptors: kept_desc, dim })
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, index: usize) -> Vector3<f64> {
        self.cloud.points[index]
    }

    pub fn descriptor(&self, index: usize) -> &[f32] {
        &self.descriptors[index * self.dim..(index + 1) * self.dim]
    }

    /// Flat row-major descriptor storage.
    pub fn descriptors(&self) -> &[f32] {
        &self.descriptors
    }

    /// New cloud holding the given point indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut points = Vec::with_capacity(indices.len());
        let mut descriptors = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            points.push(self.cloud.points[i]);
            descriptors.extend_from_slice(self.descriptor(i));
        }
        Self { cloud: PointCloud::new(points), descriptors, dim: self.dim }
    }

    pub fn into_parts(self) -> (PointCloud, Vec<f32>, usize) {
        (self.cloud, self.descriptors, self.dim)
    }

    /// Same descriptors over rigidly moved geometry.
    pub fn transformed(&self, t: &crate::transform::RigidTransform) -> Self {
        Self {
            cloud: t.apply(&self.cloud),
            descriptors: self.descriptors.clone(),
            dim: self.dim,
        }
    }

    /// Concatenates clouds in order; dims must agree.
    pub fn concat(parts: &[&DescriptorCloud]) -> Result<Self> {
        let dim = match parts.first() {
            Some(p) => p.dim,
            None => return Err(Error::InvalidConfig("concat of zero clouds".into())),
        };
        let mut points = Vec::new();
        let mut descriptors = Vec::new();
        for part in parts {
            if part.dim != dim {
                return Err(Error::DimMismatch { expected: dim, got: part.dim });
            }
            points.extend_from_slice(&part.cloud.points);
            descriptors.extend_from_slice(&part.descriptors);
        }
        Ok(Self { cloud: PointCloud::new(points), descriptors, dim })
    }
}

/// Voxel grid geometry used by downsampling and map assembly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VoxelGridParams {
    pub voxel_size: f64,
    pub origin: Vector3<f64>,
}

impl Default for VoxelGridParams {
    fn default() -> Self {
        Self { voxel_size: 0.25, origin: Vector3::zeros() }
    }
}

impl VoxelGridParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_size.is_finite() && self.voxel_size > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "voxel_size must be positive and finite, got {}",
                self.voxel_size
            )));
        }
        Ok(())
    }
}
