//! Randomized behavioral properties spanning the whole library: geometry
//! round trips, solver exactness, matching-oracle agreement, metric
//! symmetries, curve monotonicity, clustering partitions, and pipeline
//! equivariance.

use std::collections::{HashMap, HashSet};

use mapreg::benchmark::{synthesize_scene, SceneSynthConfig};
use mapreg::downsample::{voxel_downsample, voxel_index};
use mapreg::matching::dot_f64;
use mapreg::metrics::strictness_thresholds;
use mapreg::transform::euler_xyz;
use mapreg::{
    align_kabsch, cluster_points, match_descriptors, normalize_descriptors, ransac_align,
    recall_curve, register_pipeline, registration_recall, remove_clusters_detailed, rre, rte,
    ClusterConfig, Correspondence, DescriptorCloud, MatchConfig, PointCloud, RansacConfig,
    RegisterConfig, RigidTransform, SuccessThreshold, VoxelGridParams, WorldParams,
};
use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const PI: f64 = std::f64::consts::PI;

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    euler_xyz(
        rng.random_range(-PI..PI),
        rng.random_range(-PI..PI),
        rng.random_range(-PI..PI),
    )
}

fn random_transform(rng: &mut ChaCha8Rng, reach: f64) -> RigidTransform {
    let t = Vector3::new(
        rng.random_range(-reach..reach),
        rng.random_range(-reach..reach),
        rng.random_range(-reach..reach),
    );
    RigidTransform::new(random_rotation(rng), t)
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, half: f64) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| {
            Vector3::new(
                rng.random_range(-half..half),
                rng.random_range(-half..half),
                rng.random_range(-half..half),
            )
        })
        .collect()
}

fn random_descriptor_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize, half: f64) -> DescriptorCloud {
    let points = random_points(rng, n, half);
    let descriptors: Vec<f32> = (0..n * dim).map(|_| StandardNormal.sample(rng)).collect();
    DescriptorCloud::new(PointCloud::new(points), descriptors, dim).unwrap()
}

/// Same argmax/gate/tie-break semantics as the production matcher, written
/// as the obvious nested loop over `dot_f64`.
fn oracle_match(scan: &DescriptorCloud, map: &DescriptorCloud, threshold: f64) -> Vec<Correspondence> {
    let mut out = Vec::new();
    for i in 0..scan.len() {
        let query = scan.descriptor(i);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..map.len() {
            let s = dot_f64(query, map.descriptor(j));
            if best.map_or(true, |(_, bs)| s > bs) {
                best = Some((j, s));
            }
        }
        if let Some((map_index, similarity)) = best {
            if similarity > threshold {
                out.push(Correspondence { scan_index: i, map_index, similarity });
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn applying_a_transform_then_its_inverse_is_identity(seed: u64, n in 1usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_transform(&mut rng, 50.0);
        let back = t.inverse();
        for p in random_points(&mut rng, n, 25.0) {
            let q = back.apply_point(&t.apply_point(&p));
            for k in 0..3 {
                prop_assert!((q[k] - p[k]).abs() < 1e-9, "coordinate drifted: {} vs {}", q[k], p[k]);
            }
        }
        // Compare entries directly: the angle metric's acos has a sqrt(eps)
        // resolution floor at zero, far coarser than the actual residual.
        let id = back.compose(&t);
        let rot_drift = (id.rotation - Matrix3::identity()).abs().max();
        prop_assert!(rot_drift < 1e-12, "rotation drift {rot_drift}");
        prop_assert!(id.translation.norm() < 1e-9);
    }

    #[test]
    fn rotation_error_is_symmetric_and_metrics_ignore_a_common_left_factor(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = random_transform(&mut rng, 40.0);
        let est = random_transform(&mut rng, 40.0);
        let g = random_transform(&mut rng, 40.0);

        prop_assert_eq!(rre(&gt, &est), rre(&est, &gt));

        let shifted_gt = g.compose(&gt);
        let shifted_est = g.compose(&est);
        prop_assert!((rte(&shifted_est, &shifted_gt) - rte(&est, &gt)).abs() < 1e-9);
        prop_assert!((rre(&shifted_est, &shifted_gt) - rre(&est, &gt)).abs() < 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rigid_alignment_is_exact_on_noiseless_correspondences(seed: u64, n in 3usize..=48) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_transform(&mut rng, 30.0);
        let src = loop {
            let pts = random_points(&mut rng, n, 10.0);
            if n > 3 {
                break pts;
            }
            // Keep minimal triples comfortably away from collinearity so the
            // exactness bound applies.
            let a = pts[1] - pts[0];
            let b = pts[2] - pts[0];
            if a.cross(&b).norm() > 0.05 * a.norm() * b.norm() {
                break pts;
            }
        };
        let dst: Vec<Vector3<f64>> = src.iter().map(|p| truth.apply_point(p)).collect();
        let est = align_kabsch(&src, &dst).unwrap();
        prop_assert!(rte(&est, &truth) < 1e-9, "rte {}", rte(&est, &truth));
        let rot_err = (est.rotation - truth.rotation).abs().max();
        prop_assert!(rot_err < 1e-9, "rotation entries differ by {rot_err}");
    }

    #[test]
    fn voxel_downsample_keeps_one_input_point_per_cell(
        seed: u64,
        n in 1usize..400,
        voxel in 0.3f64..2.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = random_descriptor_cloud(&mut rng, n, 4, 8.0);
        let params = VoxelGridParams {
            voxel_size: voxel,
            origin: Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ),
        };
        let out = voxel_downsample(&cloud, &params);
        prop_assert!(out.len() <= cloud.len());

        let mut by_bits: HashMap<[u64; 3], Vec<usize>> = HashMap::new();
        for i in 0..cloud.len() {
            let p = cloud.point(i);
            by_bits.entry([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).or_default().push(i);
        }
        let mut seen_cells = HashSet::new();
        for i in 0..out.len() {
            let p = out.point(i);
            prop_assert!(
                seen_cells.insert(voxel_index(&p, &params)),
                "two retained points share voxel {:?}",
                voxel_index(&p, &params)
            );
            let sources = by_bits
                .get(&[p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
                .expect("retained point must be an input point");
            prop_assert!(
                sources.iter().any(|&j| cloud.descriptor(j) == out.descriptor(i)),
                "retained descriptor row does not bit-match its source point"
            );
        }
    }

    #[test]
    fn recall_curve_is_monotone_and_anchored_at_the_operating_points(
        seed: u64,
        n_pairs in 1usize..60,
        steps in 2usize..=40,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<(RigidTransform, RigidTransform)> = (0..n_pairs)
            .map(|_| {
                let gt = random_transform(&mut rng, 20.0);
                let axis = Unit::new_normalize(Vector3::new(
                    rng.random_range(-1.0..1.0f64),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ));
                let angle = rng.random_range(0.0..6.0f64).to_radians();
                let shift = rng.random_range(0.0..3.0);
                let dir = Unit::new_normalize(Vector3::new(
                    rng.random_range(-1.0..1.0f64),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ));
                let est = RigidTransform::new(
                    gt.rotation * Rotation3::from_axis_angle(&axis, angle).into_inner(),
                    gt.translation + shift * dir.into_inner(),
                );
                (gt, est)
            })
            .collect();

        let curve = recall_curve(&pairs, (0.0, 1.0), steps);
        prop_assert_eq!(curve.len(), steps);
        for w in curve.windows(2) {
            prop_assert!(
                w[1].recall >= w[0].recall,
                "recall dropped from {} to {} as strictness loosened",
                w[0].recall,
                w[1].recall
            );
        }
        for sample in &curve {
            let thr = strictness_thresholds(sample.strictness);
            prop_assert_eq!(sample.rte_max, thr.rte_max);
            prop_assert_eq!(sample.rre_max, thr.rre_max);
        }
        let strict = registration_recall(&pairs, &SuccessThreshold { rte_max: 0.6, rre_max: 1.5 });
        let loose = registration_recall(&pairs, &SuccessThreshold { rte_max: 2.0, rre_max: 5.0 });
        prop_assert_eq!(curve[0].recall, strict);
        prop_assert_eq!(curve[steps - 1].recall, loose);
    }

    #[test]
    fn cluster_removal_only_deletes_points_from_the_chosen_clusters(
        seed: u64,
        n in 10usize..200,
        p in 0.0f64..=1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = random_descriptor_cloud(&mut rng, n, 4, 10.0);

        let mut pool: Vec<usize> = (0..n).collect();
        pool.shuffle(&mut rng);
        pool.truncate(rng.random_range(0..=n));
        let groups = rng.random_range(1..=5usize);
        let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); groups];
        for (k, idx) in pool.iter().enumerate() {
            clusters[k % groups].push(*idx);
        }
        clusters.retain(|c| !c.is_empty());
        for c in &mut clusters {
            c.sort_unstable();
        }

        let (kept, removed_ids) =
            remove_clusters_detailed(&cloud, &clusters, p, rng.random()).unwrap();

        prop_assert!(removed_ids.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(removed_ids.iter().all(|&c| c < clusters.len()));

        let removed_points: HashSet<usize> =
            removed_ids.iter().flat_map(|&c| clusters[c].iter().copied()).collect();
        let expected_kept: Vec<usize> =
            (0..n).filter(|i| !removed_points.contains(i)).collect();
        prop_assert_eq!(kept.len(), expected_kept.len());
        for (out_i, &src_i) in expected_kept.iter().enumerate() {
            prop_assert_eq!(kept.point(out_i), cloud.point(src_i));
            prop_assert_eq!(kept.descriptor(out_i), cloud.descriptor(src_i));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn matching_agrees_with_a_nested_loop_oracle(
        seed: u64,
        v in 1usize..=12,
        k in 1usize..=50,
        dim in 2usize..=8,
        threshold in 0.0f64..0.9,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scan = normalize_descriptors(&random_descriptor_cloud(&mut rng, v, dim, 5.0));
        let map = normalize_descriptors(&random_descriptor_cloud(&mut rng, k, dim, 5.0));
        let cfg = MatchConfig { cos_threshold: threshold, exact: true };

        let got = match_descriptors(&scan, &map, &cfg).unwrap();
        let want = oracle_match(&scan, &map, threshold);

        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert_eq!(g.scan_index, w.scan_index);
            prop_assert_eq!(g.map_index, w.map_index);
            prop_assert_eq!(g.similarity.to_bits(), w.similarity.to_bits());
            prop_assert!(g.similarity > threshold && g.similarity <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn matching_is_stable_under_map_permutation(
        seed: u64,
        v in 1usize..=10,
        k in 2usize..=40,
    ) {
        let dim = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scan = normalize_descriptors(&random_descriptor_cloud(&mut rng, v, dim, 5.0));
        let map = normalize_descriptors(&random_descriptor_cloud(&mut rng, k, dim, 5.0));

        let mut perm: Vec<usize> = (0..k).collect();
        perm.shuffle(&mut rng);
        let points: Vec<Vector3<f64>> = perm.iter().map(|&j| map.point(j)).collect();
        let mut descriptors = Vec::with_capacity(k * dim);
        for &j in &perm {
            descriptors.extend_from_slice(map.descriptor(j));
        }
        let shuffled =
            DescriptorCloud::new(PointCloud::new(points), descriptors, dim).unwrap();

        let cfg = MatchConfig { cos_threshold: 0.3, exact: true };
        let base = match_descriptors(&scan, &map, &cfg).unwrap();
        let moved = match_descriptors(&scan, &shuffled, &cfg).unwrap();

        prop_assert_eq!(base.len(), moved.len());
        for (b, m) in base.iter().zip(&moved) {
            prop_assert_eq!(b.scan_index, m.scan_index);
            prop_assert_eq!(b.similarity.to_bits(), m.similarity.to_bits());
            // With a unique maximum the picked row must be the same physical
            // point; exact ties may legitimately resolve to another row.
            let query = scan.descriptor(b.scan_index);
            let ties = (0..k)
                .filter(|&j| dot_f64(query, map.descriptor(j)) == b.similarity)
                .count();
            if ties == 1 {
                prop_assert_eq!(perm[m.map_index], b.map_index);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clustering_partitions_the_requested_indices(
        seed: u64,
        n in 1usize..200,
        eps in 0.3f64..1.5,
        min_points in 1usize..8,
        keep in 0.2f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = random_descriptor_cloud(&mut rng, n, 4, 6.0);
        let indices: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < keep).collect();
        let cfg = ClusterConfig { eps, min_points };

        let (clusters, noise) = cluster_points(&cloud, &indices, &cfg);

        let mut union: Vec<usize> = noise.clone();
        for c in &clusters {
            prop_assert!(!c.is_empty());
            prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
            union.extend_from_slice(c);
        }
        let distinct: HashSet<usize> = union.iter().copied().collect();
        prop_assert_eq!(distinct.len(), union.len(), "clusters and noise overlap");
        union.sort_unstable();
        prop_assert_eq!(union, indices);
    }

    #[test]
    fn consensus_count_matches_a_recount_under_the_returned_model(
        seed: u64,
        n in 30usize..120,
        inlier_ratio in 0.4f64..0.9,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_transform(&mut rng, 10.0);
        let src = random_points(&mut rng, n, 10.0);
        let mut dst = Vec::with_capacity(n);
        for p in &src {
            let q = truth.apply_point(p);
            if rng.random::<f64>() < inlier_ratio {
                dst.push(q + 0.05 * Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()));
            } else {
                dst.push(q + Vector3::new(
                    rng.random_range(2.0..20.0f64),
                    rng.random_range(2.0..20.0),
                    rng.random_range(2.0..20.0),
                ));
            }
        }
        let scan = PointCloud::new(src);
        let map = PointCloud::new(dst);
        let corrs: Vec<Correspondence> = (0..n)
            .map(|i| Correspondence { scan_index: i, map_index: i, similarity: 1.0 })
            .collect();
        let cfg = RansacConfig {
            iterations: 2_000,
            inlier_threshold: 0.5,
            min_inliers: 3,
            seed: rng.random(),
            early_stop: false,
        };

        let (model, count) = ransac_align(&scan, &map, &corrs, &cfg).unwrap();

        let recount = (0..n)
            .filter(|&i| (model.apply_point(&scan.points[i]) - map.points[i]).norm() < cfg.inlier_threshold)
            .count();
        prop_assert_eq!(count, recount);
        prop_assert!(count >= cfg.min_inliers);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scan_sampling_returns_the_requested_point_count(
        seed: u64,
        n_points in 1usize..=300,
    ) {
        let params = WorldParams {
            extent: 20.0,
            tile_size: 2.0,
            n_buildings: 1,
            n_cars: 2,
            n_trees: 2,
            ..WorldParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let world = mapreg::generate_world(&params, rng.random()).unwrap();
        let pose = RigidTransform::new(
            euler_xyz(0.0, 0.0, rng.random_range(-PI..PI)),
            Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), 0.0),
        );
        let scan = mapreg::simulate_scan(&world, &pose, n_points, 15.0, rng.random()).unwrap();
        prop_assert_eq!(scan.cloud.len(), n_points);
        prop_assert_eq!(scan.labels.len(), n_points);
    }
}

/// Re-registering the same scan expressed in a rotated/translated frame must
/// land on the same map pose: fine' ∘ G ≈ fine. Also pins bit-level
/// determinism of the full pipeline and the non-increasing ICP error curve.
#[test]
fn pipeline_is_deterministic_and_scan_frame_equivariant() {
    let world_params = WorldParams {
        extent: 40.0,
        tile_size: 1.0,
        n_buildings: 2,
        n_cars: 4,
        n_trees: 6,
        ..WorldParams::default()
    };
    let world = mapreg::generate_world(&world_params, 11).unwrap();
    let scene = synthesize_scene(
        &world,
        &SceneSynthConfig {
            map_points: 15_000,
            scan_points: 1_500,
            n_sessions: 1,
            max_range: 35.0,
            seed: 3,
        },
    )
    .unwrap();
    let scan = &scene.scans[0].1;

    let mut cfg = RegisterConfig::default();
    cfg.downsample_factor = 4;
    cfg.ransac.inlier_threshold = 0.3;

    let first = register_pipeline(scan, &scene.map, &cfg);
    let second = register_pipeline(scan, &scene.map, &cfg);
    let (coarse_a, inliers_a) = first.coarse.expect("pipeline should produce a coarse model");
    let (coarse_b, inliers_b) = second.coarse.unwrap();
    assert_eq!(coarse_a.rotation.as_slice(), coarse_b.rotation.as_slice());
    assert_eq!(coarse_a.translation.as_slice(), coarse_b.translation.as_slice());
    assert_eq!(inliers_a, inliers_b);
    let icp_a = first.icp.expect("pipeline should refine");
    let icp_b = second.icp.unwrap();
    assert_eq!(icp_a.rmse_history, icp_b.rmse_history);
    assert_eq!(icp_a.transform.rotation.as_slice(), icp_b.transform.rotation.as_slice());
    assert_eq!(icp_a.transform.translation.as_slice(), icp_b.transform.translation.as_slice());

    assert!(
        icp_a.rmse_history.windows(2).all(|w| w[1] <= w[0] + 1e-12),
        "icp error curve increased: {:?}",
        icp_a.rmse_history
    );

    let fine = icp_a.transform;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..3 {
        let g = random_transform(&mut rng, 15.0);
        let moved = scan.transformed(&g);
        let outcome = register_pipeline(&moved, &scene.map, &cfg);
        let fine_moved = outcome.icp.expect("moved-frame registration should refine").transform;
        let recovered = fine_moved.compose(&g);
        let dt = rte(&recovered, &fine);
        let dr = rre(&recovered, &fine);
        println!("frame shift {trial}: rte {dt:.6} m, rre {dr:.6} deg");
        assert!(dt < 0.05, "translation disagrees after frame shift: {dt}");
        assert!(dr < 0.5, "rotation disagrees after frame shift: {dr}");
    }
}
