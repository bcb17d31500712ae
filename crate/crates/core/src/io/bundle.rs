//! Scene-bundle directory layout: `map.dpc`, `scan_<k>.dpc`, `gt.json`
//! (list of poses in scan order), `meta.json` (center, prior radius,
//! session ids).

use std::path::Path;

use nalgebra::Vector3;

use crate::benchmark::BenchmarkScene;
use crate::error::{Error, Result};
use crate::io::dpc::{read_dpc, write_dpc};
use crate::io::jsons::{read_json, write_json, MetaJson, PoseJson};
use crate::transform::RigidTransform;

pub fn write_bundle(dir: impl AsRef<Path>, scene: &BenchmarkScene) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_dpc(dir.join("map.dpc"), &scene.map)?;
    for (k, (_, scan)) in scene.scans.iter().enumerate() {
        write_dpc(dir.join(format!("scan_{k}.dpc")), scan)?;
    }
    let gts: Vec<PoseJson> = scene.ground_truths.iter().map(PoseJson::from).collect();
    write_json(dir.join("gt.json"), &gts)?;
    let meta = MetaJson {
        center: [scene.center.x, scene.center.y, scene.center.z],
        prior_radius: scene.prior_radius,
        sessions: scene.scans.iter().map(|&(sid, _)| sid).collect(),
    };
    write_json(dir.join("meta.json"), &meta)
}

pub fn read_bundle(dir: impl AsRef<Path>) -> Result<BenchmarkScene> {
    let dir = dir.as_ref();
    let meta: MetaJson = read_json(dir.join("meta.json"))?;
    let gts: Vec<PoseJson> = read_json(dir.join("gt.json"))?;
    if gts.len() != meta.sessions.len() {
        return Err(Error::format(
            dir.join("gt.json"),
            format!("{} poses for {} scans", gts.len(), meta.sessions.len()),
        ));
    }
    let map = read_dpc(dir.join("map.dpc"))?;
    let mut scans = Vec::with_capacity(meta.sessions.len());
    for (k, &sid) in meta.sessions.iter().enumerate() {
        scans.push((sid, read_dpc(dir.join(format!("scan_{k}.dpc")))?));
    }
    let ground_truths: Vec<RigidTransform> =
        gts.iter().map(RigidTransform::from).collect();
    BenchmarkScene::new(
        map,
        scans,
        ground_truths,
        Vector3::new(meta.center[0], meta.center[1], meta.center[2]),
        meta.prior_radius,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{DescriptorCloud, PointCloud};
    use crate::transform::euler_xyz;

    fn tiny_scene() -> BenchmarkScene {
        let cloud = |offset: f64, n: usize| {
            let points = (0..n)
                .map(|i| Vector3::new(offset + i as f64 * 0.5, offset, 1.0))
                .collect();
            let desc = (0..n * 2).map(|i| 0.5 + i as f32 * 0.125).collect();
            DescriptorCloud::new(PointCloud::new(points), desc, 2).unwrap()
        };
        BenchmarkScene::new(
            cloud(0.0, 40),
            vec![(0, cloud(1.0, 12)), (2, cloud(2.0, 9))],
            vec![
                RigidTransform::new(euler_xyz(0.1, 0.2, 0.3), Vector3::new(1.0, 2.0, 3.0)),
                RigidTransform::identity(),
            ],
            Vector3::new(5.0, 5.0, 0.0),
            80.0,
        )
        .unwrap()
    }

    #[test]
    fn bundle_roundtrip_preserves_scene_structure() {
        let dir = tempfile::tempdir().unwrap();
        let scene = tiny_scene();
        write_bundle(dir.path(), &scene).unwrap();
        for name in ["map.dpc", "scan_0.dpc", "scan_1.dpc", "gt.json", "meta.json"] {
            assert!(dir.path().join(name).exists(), "missing {name}");
        }
        let back = read_bundle(dir.path()).unwrap();
        assert_eq!(back.map.len(), scene.map.len());
        assert_eq!(back.scans.len(), 2);
        assert_eq!(back.scans[1].0, 2);
        assert_eq!(back.scans[1].1.descriptors(), scene.scans[1].1.descriptors());
        for (a, b) in back.ground_truths.iter().zip(&scene.ground_truths) {
            assert_eq!(a.rotation, b.rotation);
            assert_eq!(a.translation, b.translation);
        }
        assert_eq!(back.center, scene.center);
        assert_eq!(back.prior_radius, scene.prior_radius);
    }

    #[test]
    fn pose_count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let scene = tiny_scene();
        write_bundle(dir.path(), &scene).unwrap();
        let gts: Vec<PoseJson> =
            vec![PoseJson::from(&RigidTransform::identity())];
        write_json(dir.path().join("gt.json"), &gts).unwrap();
        assert!(matches!(
            read_bundle(dir.path()).unwrap_err(),
            Error::Format { .. }
        ));
    }

    #[test]
    fn missing_scan_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let scene = tiny_scene();
        write_bundle(dir.path(), &scene).unwrap();
        std::fs::remove_file(dir.path().join("scan_1.dpc")).unwrap();
        assert!(matches!(read_bundle(dir.path()).unwrap_err(), Error::Io { .. }));
    }
}
