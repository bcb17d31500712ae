use std::collections::HashMap;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::{DescriptorCloud, VoxelGridParams};

/// Integer voxel coordinates of a point under the given grid.
pub fn voxel_index(p: &Vector3<f64>, params: &VoxelGridParams) -> (i64, i64, i64) {
    let s = params.voxel_size;
    (
        ((p.x - params.origin.x) / s).floor() as i64,
        ((p.y - params.origin.y) / s).floor() as i64,
        ((p.z - params.origin.z) / s).floor() as i64,
    )
}

/// Voxel-grid downsampling. Each occupied voxel is reduced to the member point
/// closest to the voxel's point centroid (lowest index on ties), keeping that
/// point's descriptor row. Output voxels appear in first-occurrence order of
/// the input, so the result is independent of hash-map iteration order.
pub fn voxel_downsample(cloud: &DescriptorCloud, params: &VoxelGridParams) -> DescriptorCloud {
    params.validate().expect("voxel grid parameters must be valid");

    let mut groups: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    let mut order: Vec<(i64, i64, i64)> = Vec::new();
    for (i, p) in cloud.cloud.points.iter().enumerate() {
        let key = voxel_index(p, params);
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(i);
    }

    let mut selected = Vec::with_capacity(order.len());
    for key in &order {
        let members = &groups[key];
        let mut centroid = Vector3::zeros();
        for &i in members {
            centroid += cloud.cloud.points[i];
        }
        centroid /= members.len() as f64;

        let mut best = members[0];
        let mut best_d2 = (cloud.cloud.points[best] - centroid).norm_squared();
        for &i in &members[1..] {
            let d2 = (cloud.cloud.points[i] - centroid).norm_squared();
            if d2 < best_d2 {
                best = i;
                best_d2 = d2;
            }
        }
        selected.push(best);
    }

    cloud.select(&selected)
}

/// Keeps `ceil(n / factor)` points drawn uniformly without replacement;
/// selected indices are emitted in ascending order. `factor == 1` keeps
/// every point.
pub fn random_downsample(cloud: &DescriptorCloud, factor: usize, seed: u64) -> DescriptorCloud {
    assert!(factor >= 1, "downsample factor must be >= 1");
    let n = cloud.len();
    if n == 0 || factor == 1 {
        return cloud.clone();
    }
    let k = n.div_ceil(factor);

    // Partial Fisher-Yates over the index array: first k slots are the sample.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        indices.swap(i, j);
    }
    let mut selected = indices[..k].to_vec();
    selected.sort_unstable();
    cloud.select(&selected)
}
