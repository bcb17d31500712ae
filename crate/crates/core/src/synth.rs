use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::{DescriptorCloud, PointCloud};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use crate::transform::RigidTransform;

/// Maximum pairwise cosine similarity allowed between class prototypes.
pub const PROTOTYPE_MAX_COS: f64 = 0.5;

/// Surface primitive making up a world object. All coordinates in meters,
/// world frame; boxes and cylinders rest on their base.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Horizontal rectangle at `center.z`, extending ±half_extents in x/y.
    Ground { center: Vector3<f64>, half_extents: [f64; 2] },
    /// Axis sizes are full extents; rotated by `yaw` about +z through center.
    Box { center: Vector3<f64>, size: Vector3<f64>, yaw: f64 },
    /// Lateral surface plus top cap; `base` is the bottom-center.
    Cylinder { base: Vector3<f64>, radius: f64, height: f64 },
    Ellipsoid { center: Vector3<f64>, radii: Vector3<f64> },
    /// Parallelogram patch spanned by `u` and `v` from `origin` (facade and
    /// roof panels).
    Rect { origin: Vector3<f64>, u: Vector3<f64>, v: Vector3<f64> },
}

impl Primitive {
    /// Total sampleable surface area.
    pub fn surface_area(&self) -> f64 {
        match *self {
            Primitive::Ground { half_extents: [hx, hy], .. } => 4.0 * hx * hy,
            Primitive::Box { size, .. } => {
                2.0 * (size.x * size.y + size.y * size.z + size.z * size.x)
            }
            Primitive::Cylinder { radius, height, .. } => {
                2.0 * std::f64::consts::PI * radius * height
                    + std::f64::consts::PI * radius * radius
            }
            Primitive::Ellipsoid { radii, .. } => {
                // Thomsen's approximation (relative error < 1.1%), ample for
                // area-weighted sampling.
                const P: f64 = 1.6075;
                let (a, b, c) = (radii.x, radii.y, radii.z);
                let s = ((a * b).powf(P) + (a * c).powf(P) + (b * c).powf(P)) / 3.0;
                4.0 * std::f64::consts::PI * s.powf(1.0 / P)
            }
            Primitive::Rect { u, v, .. } => u.cross(&v).norm(),
        }
    }

    /// Sphere guaranteed to contain the whole surface: `(center, radius)`.
    pub fn bounding_sphere(&self) -> (Vector3<f64>, f64) {
        match *self {
            Primitive::Ground { center, half_extents: [hx, hy] } => {
                (center, hx.hypot(hy))
            }
            Primitive::Box { center, size, .. } => (center, size.norm() / 2.0),
            Primitive::Cylinder { base, radius, height } => (
                base + Vector3::new(0.0, 0.0, height / 2.0),
                radius.hypot(height / 2.0),
            ),
            Primitive::Ellipsoid { center, radii } => {
                (center, radii.x.max(radii.y).max(radii.z))
            }
            Primitive::Rect { origin, u, v } => {
                let center = origin + (u + v) / 2.0;
                (center, ((u + v).norm() / 2.0).max((u - v).norm() / 2.0))
            }
        }
    }

    /// Uniform-by-area point on the surface.
    fn sample_surface(&self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        match *self {
            Primitive::Ground { center, half_extents: [hx, hy] } => Vector3::new(
                center.x + rng.random_range(-hx..=hx),
                center.y + rng.random_range(-hy..=hy),
                center.z,
            ),
            Primitive::Box { center, size, yaw } => {
                let h = size / 2.0;
                // Face areas: ±x, ±y, ±z pairs.
                let ax = size.y * size.z;
                let ay = size.x * size.z;
                let az = size.x * size.y;
                let u = rng.random_range(0.0..(ax + ay + az));
                let s: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let local = if u < ax {
                    Vector3::new(
                        s * h.x,
                        rng.random_range(-h.y..=h.y),
                        rng.random_range(-h.z..=h.z),
                    )
                } else if u < ax + ay {
                    Vector3::new(
                        rng.random_range(-h.x..=h.x),
                        s * h.y,
                        rng.random_range(-h.z..=h.z),
                    )
                } else {
                    Vector3::new(
                        rng.random_range(-h.x..=h.x),
                        rng.random_range(-h.y..=h.y),
                        s * h.z,
                    )
                };
                let (sin, cos) = yaw.sin_cos();
                center
                    + Vector3::new(
                        cos * local.x - sin * local.y,
                        sin * local.x + cos * local.y,
                        local.z,
                    )
            }
            Primitive::Cylinder { base, radius, height } => {
                let lateral = 2.0 * std::f64::consts::PI * radius * height;
                let cap = std::f64::consts::PI * radius * radius;
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                if rng.random_range(0.0..(lateral + cap)) < lateral {
                    let z = rng.random_range(0.0..=height);
                    base + Vector3::new(radius * theta.cos(), radius * theta.sin(), z)
                } else {
                    let rho = radius * rng.random::<f64>().sqrt();
                    base + Vector3::new(rho * theta.cos(), rho * theta.sin(), height)
                }
            }
            Primitive::Ellipsoid { center, radii } => {
                let (a, b, c) = (radii.x, radii.y, radii.z);
                let w_max = (b * c).max(a * c).max(a * b);
                // Rejection-reweighted sphere sampling: density on the
                // ellipsoid is proportional to |n| = ‖(u1·bc, u2·ac, u3·ab)‖.
                loop {
                    let mut u: Vector3<f64> = Vector3::new(
                        StandardNormal.sample(rng),
                        StandardNormal.sample(rng),
                        StandardNormal.sample(rng),
                    );
                    let n = u.norm();
                    if n < 1e-12 {
                        continue;
                    }
                    u /= n;
                    let w = ((u.x * b * c).powi(2)
                        + (u.y * a * c).powi(2)
                        + (u.z * a * b).powi(2))
                    .sqrt();
                    if rng.random::<f64>() * w_max <= w {
                        return center + Vector3::new(a * u.x, b * u.y, c * u.z);
                    }
                }
            }
            Primitive::Rect { origin, u, v } => {
                origin + u * rng.random::<f64>() + v * rng.random::<f64>()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub class_id: u32,
    pub primitive: Primitive,
}

/// Synthetic world: surface primitives tagged with semantic classes, plus a
/// per-class unit descriptor prototype. Stands in for a learned per-point
/// descriptor extractor so the full pipeline can run hermetically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WorldJson", into = "WorldJson")]
pub struct SemanticWorld {
    pub objects: Vec<WorldObject>,
    pub descriptor_dim: usize,
    pub noise_sigma: f64,
    pub prototypes_seed: u64,
    prototypes: Vec<Vec<f32>>,
}

/// On-disk form: prototypes are regenerated from the seed, not stored.
#[derive(Serialize, Deserialize)]
struct WorldJson {
    objects: Vec<WorldObject>,
    descriptor_dim: usize,
    noise_sigma: f64,
    prototypes_seed: u64,
}

impl From<SemanticWorld> for WorldJson {
    fn from(w: SemanticWorld) -> Self {
        Self {
            objects: w.objects,
            descriptor_dim: w.descriptor_dim,
            noise_sigma: w.noise_sigma,
            prototypes_seed: w.prototypes_seed,
        }
    }
}

impl TryFrom<WorldJson> for SemanticWorld {
    type Error = Error;
    fn try_from(j: WorldJson) -> Result<Self> {
        SemanticWorld::new(j.objects, j.descriptor_dim, j.noise_sigma, j.prototypes_seed)
    }
}

impl SemanticWorld {
    /// Builds the world and rejection-samples one unit prototype per class so
    /// all pairwise cosine similarities stay below `PROTOTYPE_MAX_COS`.
    pub fn new(
        objects: Vec<WorldObject>,
        descriptor_dim: usize,
        noise_sigma: f64,
        prototypes_seed: u64,
    ) -> Result<Self> {
        if descriptor_dim == 0 {
            return Err(Error::InvalidConfig("descriptor_dim must be > 0".into()));
        }
        if !(noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        if objects.is_empty() {
            return Err(Error::InvalidConfig("world needs at least one object".into()));
        }
        let n_classes =
            objects.iter().map(|o| o.class_id as usize).max().unwrap() + 1;

        let mut rng = ChaCha8Rng::seed_from_u64(prototypes_seed);
        let mut prototypes: Vec<Vec<f32>> = Vec::with_capacity(n_classes);
        'next_class: for _ in 0..n_classes {
            for _attempt in 0..10_000 {
                let mut v: Vec<f64> =
                    (0..descriptor_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm < 1e-9 {
                    continue;
                }
                v.iter_mut().for_each(|x| *x /= norm);
                let candidate: Vec<f32> = v.iter().map(|&x| x as f32).collect();
                let separated = prototypes.iter().all(|p| {
                    let cos: f64 = p
                        .iter()
                        .zip(&candidate)
                        .map(|(&a, &b)| a as f64 * b as f64)
                        .sum();
                    cos < PROTOTYPE_MAX_COS
                });
                if separated {
                    prototypes.push(candidate);
                    continue 'next_class;
                }
            }
            return Err(Error::InvalidConfig(format!(
                "cannot separate {n_classes} prototypes in {descriptor_dim} dims"
            )));
        }

        Ok(Self { objects, descriptor_dim, noise_sigma, prototypes_seed, prototypes })
    }

    pub fn n_classes(&self) -> usize {
        self.prototypes.len()
    }

    pub fn prototype(&self, class_id: u32) -> &[f32] {
        &self.prototypes[class_id as usize]
    }
}

/// Scan output: descriptored points in the sensor frame plus the true class
/// of every point.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledScan {
    pub cloud: DescriptorCloud,
    pub labels: Vec<u32>,
}

/// Samples `n_points` surface points uniformly by area over the portion of
/// the world within `max_range` of the sensor position, expressed in the
/// sensor frame. Descriptors are the class prototype plus per-component
/// Gaussian noise, renormalized. Deterministic given the seed.
pub fn simulate_scan(
    world: &SemanticWorld,
    sensor_pose: &RigidTransform,
    n_points: usize,
    max_range: f64,
    seed: u64,
) -> Result<LabeledScan> {
    if n_points == 0 {
        return Err(Error::InvalidConfig("n_points must be > 0".into()));
    }
    if !(max_range > 0.0) {
        return Err(Error::InvalidConfig("max_range must be > 0".into()));
    }
    let sensor = sensor_pose.translation;

    // Keep only objects whose bounding sphere meets the range ball, with a
    // cumulative-area table for proportional selection.
    let mut candidates: Vec<&WorldObject> = Vec::new();
    let mut cumulative: Vec<f64> = Vec::new();
    let mut total = 0.0f64;
    for obj in &world.objects {
        let (center, radius) = obj.primitive.bounding_sphere();
        if (center - sensor).norm() <= max_range + radius {
            let area = obj.primitive.surface_area();
            if area > 0.0 {
                total += area;
                candidates.push(obj);
                cumulative.push(total);
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::EmptyResult);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if world.noise_sigma > 0.0 {
        Some(Normal::new(0.0f64, world.noise_sigma).expect("validated sigma"))
    } else {
        None
    };
    let dim = world.descriptor_dim;
    let world_to_sensor = sensor_pose.inverse();

    let mut points = Vec::with_capacity(n_points);
    let mut descriptors = Vec::with_capacity(n_points * dim);
    let mut labels = Vec::with_capacity(n_points);
    let max_range2 = max_range * max_range;
    let mut attempts = 0usize;
    while points.len() < n_points {
        attempts += 1;
        // Bounding spheres can intersect the range ball while the actual
        // surface stays outside it; bail out rather than spin forever.
        if points.is_empty() && attempts > 100_000 {
            return Err(Error::EmptyResult);
        }
        let u = rng.random_range(0.0..total);
        let idx = cumulative.partition_point(|&c| c <= u);
        let obj = candidates[idx.min(candidates.len() - 1)];
        let p = obj.primitive.sample_surface(&mut rng);
        if (p - sensor).norm_squared() > max_range2 {
            continue;
        }
        points.push(world_to_sensor.apply_point(&p));
        labels.push(obj.class_id);
        let proto = world.prototype(obj.class_id);
        match &noise {
            // Zero noise reproduces the prototype bit-for-bit.
            None => descriptors.extend_from_slice(proto),
            Some(normal) => {
                let mut row: Vec<f64> =
                    proto.iter().map(|&v| v as f64 + normal.sample(&mut rng)).collect();
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter_mut().for_each(|x| *x /= norm);
                }
                descriptors.extend(row.iter().map(|&x| x as f32));
            }
        }
    }

    let cloud = DescriptorCloud::new(PointCloud::new(points), descriptors, dim)?;
    Ok(LabeledScan { cloud, labels })
}

/// Layout parameters for the generated test world: a tiled ground plane where
/// every tile carries its own class (localized descriptor matches), unique
/// classes per building and car, and a single class shared by every tree
/// (the deliberately ambiguous category used by the robustness protocol).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldParams {
    /// Side length of the square world footprint, meters.
    pub extent: f64,
    /// Ground tile edge, meters.
    pub tile_size: f64,
    pub n_buildings: usize,
    pub n_cars: usize,
    pub n_trees: usize,
    pub descriptor_dim: usize,
    pub noise_sigma: f64,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            extent: 50.0,
            tile_size: 1.5,
            n_buildings: 4,
            n_cars: 8,
            n_trees: 10,
            descriptor_dim: 64,
            noise_sigma: 0.05,
        }
    }
}

impl WorldParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent > 0.0) || !(self.tile_size > 0.0) {
            return Err(Error::InvalidConfig("extent and tile_size must be > 0".into()));
        }
        let per_axis = (self.extent / self.tile_size).ceil() as usize;
        // A building contributes up to ~1,200 m² of panels.
        let per_building = (1200.0 / (self.tile_size * self.tile_size)).ceil() as usize;
        let classes = per_axis * per_axis
            + self.n_buildings * per_building
            + self.n_cars
            + usize::from(self.n_trees > 0);
        // Prototype separation becomes hopeless when classes crowd the
        // descriptor space.
        if classes > 200 * self.descriptor_dim {
            return Err(Error::InvalidConfig(format!(
                "{classes} classes is too many for dim {}",
                self.descriptor_dim
            )));
        }
        Ok(())
    }
}

/// Generates a world per `WorldParams`, deterministically from the seed.
/// The world is centered on the origin with ground at z = 0.
pub fn generate_world(params: &WorldParams, seed: u64) -> Result<SemanticWorld> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let half = params.extent / 2.0;
    let per_axis = (params.extent / params.tile_size).ceil() as usize;
    let tile = params.extent / per_axis as f64;

    let mut objects = Vec::new();
    let mut next_class: u32 = 0;
    for iy in 0..per_axis {
        for ix in 0..per_axis {
            let cx = -half + (ix as f64 + 0.5) * tile;
            let cy = -half + (iy as f64 + 0.5) * tile;
            objects.push(WorldObject {
                class_id: next_class,
                primitive: Primitive::Ground {
                    center: Vector3::new(cx, cy, 0.0),
                    half_extents: [tile / 2.0, tile / 2.0],
                },
            });
            next_class += 1;
        }
    }

    let place_xy = |rng: &mut ChaCha8Rng, margin: f64| -> (f64, f64) {
        let m = (half - margin).max(1.0);
        (rng.random_range(-m..m), rng.random_range(-m..m))
    };

    // Buildings are panelled into ~tile-sized facade and roof patches, each
    // with its own class: a descriptor match on a building then localizes to
    // one patch, the way per-point features vary across a real facade.
    for _ in 0..params.n_buildings {
        let (x, y) = place_xy(&mut rng, 8.0);
        let size = Vector3::new(
            rng.random_range(6.0..15.0),
            rng.random_range(6.0..15.0),
            rng.random_range(5.0..16.0),
        );
        let yaw = rng.random_range(0.0..std::f64::consts::TAU);
        let (sin, cos) = yaw.sin_cos();
        let rot = |l: Vector3<f64>| {
            Vector3::new(cos * l.x - sin * l.y, sin * l.x + cos * l.y, l.z)
        };
        let base = Vector3::new(x, y, 0.0);
        let ex = rot(Vector3::new(1.0, 0.0, 0.0));
        let ey = rot(Vector3::new(0.0, 1.0, 0.0));
        let ez = Vector3::new(0.0, 0.0, 1.0);
        // The four wall planes (origin corner, along, up) and the roof.
        let c00 = base + rot(Vector3::new(-size.x / 2.0, -size.y / 2.0, 0.0));
        let c10 = base + rot(Vector3::new(size.x / 2.0, -size.y / 2.0, 0.0));
        let c01 = base + rot(Vector3::new(-size.x / 2.0, size.y / 2.0, 0.0));
        let mut panel = |origin: Vector3<f64>, along: Vector3<f64>, len: f64,
                         up: Vector3<f64>, height: f64| {
            let na = (len / params.tile_size).ceil().max(1.0) as i64;
            let nb = (height / params.tile_size).ceil().max(1.0) as i64;
            let du = along * (len / na as f64);
            let dv = up * (height / nb as f64);
            for a in 0..na {
                for b in 0..nb {
                    objects.push(WorldObject {
                        class_id: next_class,
                        primitive: Primitive::Rect {
                            origin: origin + du * a as f64 + dv * b as f64,
                            u: du,
                            v: dv,
                        },
                    });
                    next_class += 1;
                }
            }
        };
        panel(c00, ex, size.x, ez, size.z); // south wall
        panel(c01, ex, size.x, ez, size.z); // north wall
        panel(c00, ey, size.y, ez, size.z); // west wall
        panel(c10, ey, size.y, ez, size.z); // east wall
        panel(c00 + ez * size.z, ex, size.x, ey, size.y); // roof
    }

    for _ in 0..params.n_cars {
        let (x, y) = place_xy(&mut rng, 3.0);
        let size = Vector3::new(
            rng.random_range(4.0..5.0),
            rng.random_range(1.7..2.0),
            rng.random_range(1.4..1.7),
        );
        objects.push(WorldObject {
            class_id: next_class,
            primitive: Primitive::Box {
                center: Vector3::new(x, y, size.z / 2.0),
                size,
                yaw: rng.random_range(0.0..std::f64::consts::TAU),
            },
        });
        next_class += 1;
    }

    if params.n_trees > 0 {
        let tree_class = next_class;
        for _ in 0..params.n_trees {
            let (x, y) = place_xy(&mut rng, 3.0);
            let trunk_r = rng.random_range(0.15..0.3);
            let trunk_h = rng.random_range(2.0..4.0);
            let canopy = Vector3::new(
                rng.random_range(1.0..2.5),
                rng.random_range(1.0..2.5),
                rng.random_range(1.2..2.5),
            );
            objects.push(WorldObject {
                class_id: tree_class,
                primitive: Primitive::Cylinder {
                    base: Vector3::new(x, y, 0.0),
                    radius: trunk_r,
                    height: trunk_h,
                },
            });
            objects.push(WorldObject {
                class_id: tree_class,
                primitive: Primitive::Ellipsoid {
                    center: Vector3::new(x, y, trunk_h + canopy.z * 0.6),
                    radii: canopy,
                },
            });
        }
    }

    SemanticWorld::new(
        objects,
        params.descriptor_dim,
        params.noise_sigma,
        derive_seed(seed, 1),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{match_descriptors, normalize_descriptors, MatchConfig};
    use crate::transform::euler_xyz;

    fn tiny_world(noise_sigma: f64) -> SemanticWorld {
        let objects = vec![
            WorldObject {
                class_id: 0,
                primitive: Primitive::Ground {
                    center: Vector3::zeros(),
                    half_extents: [5.0, 5.0],
                },
            },
            WorldObject {
                class_id: 1,
                primitive: Primitive::Box {
                    center: Vector3::new(2.0, 0.0, 1.0),
                    size: Vector3::new(2.0, 2.0, 2.0),
                    yaw: 0.3,
                },
            },
            WorldObject {
                class_id: 2,
                primitive: Primitive::Cylinder {
                    base: Vector3::new(-3.0, 1.0, 0.0),
                    radius: 0.5,
                    height: 3.0,
                },
            },
            WorldObject {
                class_id: 3,
                primitive: Primitive::Ellipsoid {
                    center: Vector3::new(-3.0, 1.0, 4.0),
                    radii: Vector3::new(1.5, 1.0, 1.2),
                },
            },
        ];
        SemanticWorld::new(objects, 16, noise_sigma, 7).unwrap()
    }

    #[test]
    fn prototypes_are_unit_and_separated() {
        let world = tiny_world(0.05);
        assert_eq!(world.n_classes(), 4);
        for i in 0..4u32 {
            let p = world.prototype(i);
            let norm: f64 = p.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
            for j in 0..i {
                let q = world.prototype(j);
                let cos: f64 = p.iter().zip(q).map(|(&a, &b)| a as f64 * b as f64).sum();
                assert!(cos < PROTOTYPE_MAX_COS, "classes {j},{i}: cos {cos}");
            }
        }
    }

    #[test]
    fn zero_noise_reproduces_prototypes_exactly() {
        let world = tiny_world(0.0);
        let scan =
            simulate_scan(&world, &RigidTransform::identity(), 200, 50.0, 3).unwrap();
        assert_eq!(scan.cloud.len(), 200);
        for i in 0..scan.cloud.len() {
            assert_eq!(scan.cloud.descriptor(i), world.prototype(scan.labels[i]));
        }
    }

    #[test]
    fn scan_is_deterministic() {
        let world = tiny_world(0.05);
        let a = simulate_scan(&world, &RigidTransform::identity(), 300, 50.0, 11).unwrap();
        let b = simulate_scan(&world, &RigidTransform::identity(), 300, 50.0, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate_scan(&world, &RigidTransform::identity(), 300, 50.0, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn out_of_range_sensor_is_empty() {
        let objects = vec![WorldObject {
            class_id: 0,
            primitive: Primitive::Ground { center: Vector3::zeros(), half_extents: [2.0, 2.0] },
        }];
        let world = SemanticWorld::new(objects, 8, 0.0, 1).unwrap();
        let pose =
            RigidTransform::new(nalgebra::Matrix3::identity(), Vector3::new(0.0, 0.0, 10.0));
        assert!(matches!(
            simulate_scan(&world, &pose, 100, 5.0, 1),
            Err(Error::EmptyResult)
        ));
    }

    #[test]
    fn points_are_in_sensor_frame_and_in_range() {
        let world = tiny_world(0.05);
        let pose = RigidTransform::new(
            euler_xyz(0.0, 0.0, 1.2),
            Vector3::new(1.0, -2.0, 1.5),
        );
        let max_range = 8.0;
        let scan = simulate_scan(&world, &pose, 400, max_range, 5).unwrap();
        for p in &scan.cloud.cloud.points {
            // Sensor sits at the origin of the scan frame.
            assert!(p.norm() <= max_range + 1e-9);
        }
        // Round-trip: world-frame points must lie near world surfaces (z in
        // the sampled band).
        for p in &scan.cloud.cloud.points {
            let w = pose.apply_point(p);
            assert!(w.z > -1e-9 && w.z < 6.0);
        }
    }

    #[test]
    fn surface_sampling_is_area_uniform_on_ground() {
        // Two tiles of equal area: point counts should split evenly.
        let objects = vec![
            WorldObject {
                class_id: 0,
                primitive: Primitive::Ground {
                    center: Vector3::new(-1.0, 0.0, 0.0),
                    half_extents: [1.0, 1.0],
                },
            },
            WorldObject {
                class_id: 1,
                primitive: Primitive::Ground {
                    center: Vector3::new(1.0, 0.0, 0.0),
                    half_extents: [1.0, 1.0],
                },
            },
        ];
        let world = SemanticWorld::new(objects, 8, 0.0, 2).unwrap();
        let n = 20_000;
        let scan =
            simulate_scan(&world, &RigidTransform::identity(), n, 100.0, 9).unwrap();
        let left = scan.labels.iter().filter(|&&c| c == 0).count();
        let frac = left as f64 / n as f64;
        println!("left-tile fraction: {frac:.4}");
        assert!((frac - 0.5).abs() < 0.02, "area weighting off: {frac}");
    }

    #[test]
    fn same_region_scans_match_mostly_same_class() {
        // Matching invariant: scan vs map of the same region pairs up points
        // of the same class ≥ 90% of the time at the default gate.
        let params = WorldParams { extent: 30.0, n_buildings: 2, ..WorldParams::default() };
        let world = generate_world(&params, 21).unwrap();
        let map = simulate_scan(&world, &RigidTransform::identity(), 6000, 1000.0, 1).unwrap();
        let scan = simulate_scan(&world, &RigidTransform::identity(), 1500, 1000.0, 2).unwrap();
        let scan_n = normalize_descriptors(&scan.cloud);
        let map_n = normalize_descriptors(&map.cloud);
        let corrs =
            match_descriptors(&scan_n, &map_n, &MatchConfig::default()).unwrap();
        assert!(corrs.len() > 500, "too few matches: {}", corrs.len());
        let same = corrs
            .iter()
            .filter(|c| scan.labels[c.scan_index] == map.labels[c.map_index])
            .count();
        let frac = same as f64 / corrs.len() as f64;
        println!("same-class match fraction: {frac:.4} over {} matches", corrs.len());
        assert!(frac >= 0.9, "same-class fraction {frac}");
    }

    #[test]
    fn world_json_round_trip_regenerates_prototypes() {
        let world = tiny_world(0.05);
        let json = serde_json::to_string(&world).unwrap();
        let back: SemanticWorld = serde_json::from_str(&json).unwrap();
        assert_eq!(world, back);
    }

    #[test]
    fn generated_world_is_deterministic_and_valid() {
        let params = WorldParams::default();
        let a = generate_world(&params, 4).unwrap();
        let b = generate_world(&params, 4).unwrap();
        assert_eq!(a, b);
        // One shared tree class: two primitives per tree, one class total.
        let tree_class = a.objects.iter().map(|o| o.class_id).max().unwrap();
        let tree_prims =
            a.objects.iter().filter(|o| o.class_id == tree_class).count();
        assert_eq!(tree_prims, 2 * params.n_trees);
    }
}
