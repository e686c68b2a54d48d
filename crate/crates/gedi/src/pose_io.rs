//! Rigid poses as 4×4 row-major homogeneous matrices in text, one row per line.

use std::fs;
use std::path::Path;

use gedi_core::RigidTransform;

use crate::error::{Error, Result};

pub fn format_pose(t: &RigidTransform) -> String {
    t.to_homogeneous()
        .iter()
        .map(|row| row.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ") + "\n")
        .collect()
}

pub fn parse_pose(path: &Path, text: &str) -> Result<RigidTransform> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|f| f.parse().map_err(|_| Error::parse_line(path, i + 1, format!("bad number {f:?}"))))
            .collect::<Result<_>>()?;
        if row.len() != 4 {
            return Err(Error::parse_line(path, i + 1, format!("expected 4 values, found {}", row.len())));
        }
        if rows.len() == 4 {
            return Err(Error::parse_line(path, i + 1, "more than four rows"));
        }
        rows.push([row[0], row[1], row[2], row[3]]);
    }
    let m: [[f64; 4]; 4] =
        rows.try_into().map_err(|r: Vec<_>| Error::parse_line(path, r.len(), "expected four rows"))?;
    Ok(RigidTransform::from_homogeneous(&m)?)
}

pub fn load_pose(path: impl AsRef<Path>) -> Result<RigidTransform> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pose(path, &text)
}

pub fn save_pose(path: impl AsRef<Path>, t: &RigidTransform) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_pose(t)).map_err(|e| Error::io(path, e))
}
