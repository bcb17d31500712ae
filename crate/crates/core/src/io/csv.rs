//! CSV report emitters for plotting: per-scan benchmark rows and recall
//! curves. Floats use `{:.8e}`; non-finite values print as `inf`/`NaN`.

use std::fmt::Write as _;
use std::path::Path;

use crate::benchmark::SceneReport;
use crate::error::{Error, Result};
use crate::metrics::RecallSample;

/// Writes one row per scan: `scene,session,rte,rre,success,icp_success`.
pub fn write_report_csv(
    path: impl AsRef<Path>,
    scenes: &[(String, SceneReport)],
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("scene,session,rte,rre,success,icp_success\n");
    for (name, report) in scenes {
        for row in &report.scans {
            writeln!(
                out,
                "{},{},{:.8e},{:.8e},{},{}",
                name, row.session_id, row.rte, row.rre, row.success, row.icp_success
            )
            .expect("string write");
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `s,rte_max,rre_max,recall` rows of a threshold-sweep curve.
pub fn write_curve_csv(path: impl AsRef<Path>, samples: &[RecallSample]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("s,rte_max,rre_max,recall\n");
    for s in samples {
        writeln!(
            out,
            "{:.8e},{:.8e},{:.8e},{:.8e}",
            s.strictness, s.rte_max, s.rre_max, s.recall
        )
        .expect("string write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::ScanReport;

    #[test]
    fn report_rows_follow_the_column_contract() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let report = SceneReport {
            scans: vec![
                ScanReport {
                    scan_index: 0,
                    session_id: 3,
                    rte: 0.125,
                    rre: 1.5,
                    success: true,
                    icp_success: true,
                    error: None,
                },
                ScanReport {
                    scan_index: 1,
                    session_id: 4,
                    rte: f64::INFINITY,
                    rre: f64::INFINITY,
                    success: false,
                    icp_success: false,
                    error: Some("no model".into()),
                },
            ],
            recall: 50.0,
            icp_recall: 50.0,
            rte_mean: Some(0.125),
            rte_std: Some(0.0),
            rre_mean: Some(1.5),
            rre_std: Some(0.0),
        };
        write_report_csv(&path, &[("scene_00".to_string(), report)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scene,session,rte,rre,success,icp_success");
        assert_eq!(lines[1], "scene_00,3,1.25000000e-1,1.50000000e0,true,true");
        assert_eq!(lines[2], "scene_00,4,inf,inf,false,false");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn curve_rows_are_ordered_as_given() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let samples = vec![
            RecallSample { strictness: 0.0, rte_max: 0.6, rre_max: 1.5, recall: 80.0 },
            RecallSample { strictness: 1.0, rte_max: 2.0, rre_max: 5.0, recall: 100.0 },
        ];
        write_curve_csv(&path, &samples).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "s,rte_max,rre_max,recall");
        assert_eq!(
            lines[1],
            "0.00000000e0,6.00000000e-1,1.50000000e0,8.00000000e1"
        );
        assert_eq!(lines.len(), 3);
    }
}
