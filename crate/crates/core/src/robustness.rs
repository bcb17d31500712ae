use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::DescriptorCloud;
use crate::error::{Error, Result};
use crate::pca::PcaColorizer;
use crate::spatial::VoxelHashIndex;

/// Horizontal radius for the local ground-height estimate around a placement.
const GROUND_RADIUS: f64 = 3.0;
/// Ground height = this percentile of map z near the placement point.
const GROUND_PERCENTILE: f64 = 5.0;

/// Selects map points whose PCA color lies near an exemplar point's color.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemanticQueryConfig {
    /// Index of the human-designated exemplar point in the map.
    pub seed_point_index: usize,
    /// Euclidean sRGB distance bound (strict) for membership.
    pub color_distance_max: f64,
}

impl Default for SemanticQueryConfig {
    fn default() -> Self {
        Self { seed_point_index: 0, color_distance_max: 50.0 }
    }
}

impl SemanticQueryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.color_distance_max > 0.0 && self.color_distance_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "color_distance_max must be positive and finite, got {}",
                self.color_distance_max
            )));
        }
        Ok(())
    }
}

/// Density-clustering parameters (eps-ball core-point form).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterConfig {
    /// Neighborhood radius in meters.
    pub eps: f64,
    /// Minimum neighbors (the point itself included) for a core point.
    pub min_points: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { eps: 1.0, min_points: 10 }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "eps must be positive and finite, got {}",
                self.eps
            )));
        }
        if self.min_points < 1 {
            return Err(Error::InvalidConfig("min_points must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Axis-aligned placement region for object insertion (x/y bounds used; z is
/// derived from local ground height).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            if !(self.min[k] <= self.max[k]) {
                return Err(Error::InvalidConfig(format!(
                    "region min must not exceed max (axis {k}: {} > {})",
                    self.min[k], self.max[k]
                )));
            }
        }
        Ok(())
    }
}

/// Indices of map points whose color (under `pca`) is within the configured
/// sRGB distance of the exemplar point's color. Ascending order; the exemplar
/// is always a member.
pub fn query_similar(
    map: &DescriptorCloud,
    pca: &PcaColorizer,
    cfg: &SemanticQueryConfig,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    if cfg.seed_point_index >= map.len() {
        return Err(Error::IndexOutOfRange { index: cfg.seed_point_index, len: map.len() });
    }
    let colors = pca.colorize(map);
    let seed = colors[cfg.seed_point_index].map(|v| v as f64);
    let max2 = cfg.color_distance_max * cfg.color_distance_max;
    Ok(colors
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            let d2: f64 = (0..3).map(|k| (c[k] as f64 - seed[k]).powi(2)).sum();
            d2 < max2
        })
        .map(|(i, _)| i)
        .collect())
}

/// Density-based clustering of the given map points by 3-D coordinates.
///
/// Core points have ≥ `min_points` neighbors (themselves included) within
/// `eps`; clusters are connected components of core points under eps
/// reachability; a non-core point joins the cluster of its lowest-index core
/// neighbor, or the noise set if it has none. Clusters are ordered by their
/// smallest member index; all index lists are ascending original map indices.
pub fn cluster_points(
    map: &DescriptorCloud,
    indices: &[usize],
    cfg: &ClusterConfig,
) -> (Vec<Vec<usize>>, Vec<usize>) {
    cfg.validate().expect("invalid cluster config");
    let mut idx: Vec<usize> = indices.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if let Some(&last) = idx.last() {
        assert!(last < map.len(), "index {last} out of range (length {})", map.len());
    }
    if idx.is_empty() {
        return (Vec::new(), Vec::new());
    }

    let pts: Vec<Vector3<f64>> = idx.iter().map(|&i| map.point(i)).collect();
    let grid = VoxelHashIndex::build(&pts, cfg.eps);
    let mut scratch = Vec::new();
    let neighbor_lists: Vec<Vec<usize>> = pts
        .iter()
        .map(|p| {
            scratch.clear();
            grid.collect_within(p, cfg.eps, &mut scratch);
            scratch.clone()
        })
        .collect();
    let core: Vec<bool> =
        neighbor_lists.iter().map(|n| n.len() >= cfg.min_points).collect();

    // Connected components of core points, discovered in ascending order so
    // component labels increase with their smallest member.
    const UNASSIGNED: usize = usize::MAX;
    let mut label = vec![UNASSIGNED; pts.len()];
    let mut n_clusters = 0;
    let mut queue = Vec::new();
    for start in 0..pts.len() {
        if !core[start] || label[start] != UNASSIGNED {
            continue;
        }
        let id = n_clusters;
        n_clusters += 1;
        label[start] = id;
        queue.push(start);
        while let Some(u) = queue.pop() {
            for &v in &neighbor_lists[u] {
                if core[v] && label[v] == UNASSIGNED {
                    label[v] = id;
                    queue.push(v);
                }
            }
        }
    }
    // Border points adopt their lowest-index core neighbor's cluster.
    for i in 0..pts.len() {
        if core[i] {
            continue;
        }
        if let Some(&c) = neighbor_lists[i].iter().find(|&&j| core[j]) {
            label[i] = label[c];
        }
    }

    let mut clusters = vec![Vec::new(); n_clusters];
    let mut noise = Vec::new();
    for (local, &original) in idx.iter().enumerate() {
        match label[local] {
            UNASSIGNED => noise.push(original),
            id => clusters[id].push(original),
        }
    }
    (clusters, noise)
}

/// Independently removes each cluster with the given probability (seeded);
/// points outside the clusters are never touched.
pub fn remove_clusters(
    map: &DescriptorCloud,
    clusters: &[Vec<usize>],
    removal_probability: f64,
    seed: u64,
) -> Result<DescriptorCloud> {
    remove_clusters_detailed(map, clusters, removal_probability, seed).map(|(c, _)| c)
}

/// As [`remove_clusters`], also reporting which cluster indices were removed.
pub fn remove_clusters_detailed(
    map: &DescriptorCloud,
    clusters: &[Vec<usize>],
    removal_probability: f64,
    seed: u64,
) -> Result<(DescriptorCloud, Vec<usize>)> {
    if !(0.0..=1.0).contains(&removal_probability) {
        return Err(Error::InvalidConfig(format!(
            "removal probability must be in [0, 1], got {removal_probability}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut removed = vec![false; map.len()];
    let mut removed_clusters = Vec::new();
    for (id, cluster) in clusters.iter().enumerate() {
        let drop = rng.random::<f64>() < removal_probability;
        if drop {
            removed_clusters.push(id);
            for &i in cluster {
                removed[i] = true;
            }
        }
    }
    let kept: Vec<usize> = (0..map.len()).filter(|&i| !removed[i]).collect();
    Ok((map.select(&kept), removed_clusters))
}

/// One placed donor: which donor was drawn and where its anchor landed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placement {
    pub donor: usize,
    pub position: Vector3<f64>,
}

/// Appends `count` donor clusters (drawn with replacement, seeded) at uniform
/// x/y positions in `region`, each dropped so its lowest point sits at the
/// local ground height (5th percentile of map z within 3 m horizontally,
/// falling back to the global 5th percentile).
pub fn insert_objects(
    map: &DescriptorCloud,
    donors: &[DescriptorCloud],
    count: usize,
    region: &Aabb,
    seed: u64,
) -> Result<DescriptorCloud> {
    insert_objects_detailed(map, donors, count, region, seed).map(|(c, _)| c)
}

/// As [`insert_objects`], also reporting each draw's donor and anchor.
pub fn insert_objects_detailed(
    map: &DescriptorCloud,
    donors: &[DescriptorCloud],
    count: usize,
    region: &Aabb,
    seed: u64,
) -> Result<(DescriptorCloud, Vec<Placement>)> {
    region.validate()?;
    if count == 0 {
        return Ok((map.clone(), Vec::new()));
    }
    if donors.is_empty() {
        return Err(Error::EmptyDonors);
    }
    for d in donors {
        if d.dim() != map.dim() {
            return Err(Error::DimMismatch { expected: map.dim(), got: d.dim() });
        }
        if d.is_empty() {
            return Err(Error::InvalidConfig("empty donor cluster".into()));
        }
    }

    let global_ground = percentile_z(map, |_| true);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: Vec<DescriptorCloud> = Vec::with_capacity(count + 1);
    let mut placements = Vec::with_capacity(count);
    let placed = map.clone();
    for _ in 0..count {
        let donor_index = rng.random_range(0..donors.len());
        let donor = &donors[donor_index];
        let x = rng.random_range(region.min.x..=region.max.x);
        let y = rng.random_range(region.min.y..=region.max.y);
        let local = percentile_z(map, |p| {
            (p.x - x).powi(2) + (p.y - y).powi(2) <= GROUND_RADIUS * GROUND_RADIUS
        });
        let ground = local.or(global_ground).unwrap_or(0.0);
        let (lo, hi) = donor.cloud.bounds().expect("non-empty donor");
        let anchor = (lo + hi) / 2.0;
        let offset = Vector3::new(x - anchor.x, y - anchor.y, ground - lo.z);
        let shift =
            crate::transform::RigidTransform::new(nalgebra::Matrix3::identity(), offset);
        parts.push(donor.transformed(&shift));
        placements.push(Placement { donor: donor_index, position: Vector3::new(x, y, ground) });
    }
    let mut all: Vec<&DescriptorCloud> = vec![&placed];
    all.extend(parts.iter());
    Ok((DescriptorCloud::concat(&all)?, placements))
}

/// Nearest-rank percentile of the z coordinates passing the filter.
fn percentile_z(
    map: &DescriptorCloud,
    filter: impl Fn(&Vector3<f64>) -> bool,
) -> Option<f64> {
    let mut zs: Vec<f64> =
        map.cloud.points.iter().filter(|p| filter(p)).map(|p| p.z).collect();
    if zs.is_empty() {
        return None;
    }
    zs.sort_by(f64::total_cmp);
    let rank = (GROUND_PERCENTILE / 100.0 * zs.len() as f64).ceil() as usize;
    Some(zs[rank.clamp(1, zs.len()) - 1])
}
