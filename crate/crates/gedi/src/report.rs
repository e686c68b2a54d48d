//! JSON evaluation reports and PCA-coloured descriptor clouds.

use std::fs;
use std::path::Path;

use gedi_core::evaluation::{pca_colors, EvalReport, PcaColors};
use gedi_core::PointCloud;
use serde_json::{json, Value};

use crate::cloud_io::save_cloud;
use crate::descriptor_io::DescriptorFile;
use crate::error::{Error, Result};
use crate::pipeline::keypoints;

/// Report as JSON. `extra` is merged into the `config` echo.
pub fn report_json(report: &EvalReport, extra: Value) -> Value {
    let pairs: Vec<Value> = report
        .pairs
        .iter()
        .map(|p| {
            json!({
                "name": p.name,
                "inlier_ratio": p.inlier_ratio.ratio,
                "no_matches": p.inlier_ratio.empty,
                "matches": p.matches,
                "rte": p.rte,
                "rre": p.rre.degrees,
                "gimbal_lock": p.rre.gimbal_lock,
                "success": p.success,
            })
        })
        .collect();
    let mut config = json!({
        "tau1": report.config.tau1,
        "tau2": report.config.tau2,
        "min_overlap": report.config.min_overlap,
        "sample_points": report.config.sample_points,
        "rte_max": report.rte_max,
        "rre_max": report.rre_max,
        "euler_convention": report.euler_convention,
    });
    if let (Value::Object(c), Value::Object(e)) = (&mut config, extra) {
        c.extend(e);
    }
    json!({
        "pairs": pairs,
        "fmr": { "recall": report.fmr.recall, "mean_inlier_ratio": report.fmr.mean, "std_inlier_ratio": report.fmr.std },
        "registration": {
            "success_rate": report.success.rate,
            "successes": report.success.successes,
            "mean_rte": report.success.mean_rte,
            "mean_rre": report.success.mean_rre,
        },
        "config": config,
    })
}

pub fn save_report(path: impl AsRef<Path>, report: &EvalReport, extra: Value) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&report_json(report, extra)).expect("JSON values always serialise");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// 8-bit RGB of unit-interval colours.
pub fn to_rgb(colors: &[[f64; 3]]) -> Vec<[u8; 3]> {
    colors.iter().map(|c| c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)).collect()
}

/// Writes the described points of `cloud` coloured by the first three
/// principal components of their descriptors.
pub fn save_pca_cloud(path: impl AsRef<Path>, cloud: &PointCloud, file: &DescriptorFile) -> Result<PcaColors> {
    let pca = pca_colors(&file.descriptors)?;
    save_cloud(path, &keypoints(cloud, file)?, Some(&to_rgb(&pca.colors)))?;
    Ok(pca)
}
