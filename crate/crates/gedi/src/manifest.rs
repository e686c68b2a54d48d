//! Dataset manifests.
//!
//! One pair per line: `cloud_a cloud_b pose overlap`, whitespace separated,
//! `#` comments allowed. Relative paths resolve against the manifest's
//! directory. The pose maps cloud B into the frame of cloud A.

use std::fs;
use std::path::{Path, PathBuf};

use gedi_core::training::TrainingPair;

use crate::cloud_io::load_cloud;
use crate::error::{Error, Result};
use crate::pose_io::load_pose;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub cloud_a: PathBuf,
    pub cloud_b: PathBuf,
    pub pose: PathBuf,
    pub overlap: f64,
}

impl ManifestEntry {
    /// Short name of the pair, the stem of cloud A.
    pub fn name(&self) -> String {
        self.cloud_a.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    }

    pub fn load(&self) -> Result<TrainingPair> {
        Ok(TrainingPair {
            a: load_cloud(&self.cloud_a)?,
            b: load_cloud(&self.cloud_b)?,
            transform: load_pose(&self.pose)?,
            overlap: self.overlap,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let [a, b, pose, overlap] = f.as_slice() else {
                return Err(Error::parse_line(path, i + 1, format!("expected 4 fields, found {}", f.len())));
            };
            let overlap: f64 =
                overlap.parse().map_err(|_| Error::parse_line(path, i + 1, format!("bad overlap {overlap:?}")))?;
            let entry = ManifestEntry { cloud_a: base.join(a), cloud_b: base.join(b), pose: base.join(pose), overlap };
            for p in [&entry.cloud_a, &entry.cloud_b, &entry.pose] {
                if !p.is_file() {
                    return Err(Error::parse_line(path, i + 1, format!("{} does not exist", p.display())));
                }
            }
            entries.push(entry);
        }
        Ok(DatasetManifest { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    /// Writes the manifest with paths relative to its directory where possible.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        let mut text = String::from("# cloud_a cloud_b pose overlap\n");
        for e in &self.entries {
            text += &format!("{} {} {} {}\n", rel(&e.cloud_a), rel(&e.cloud_b), rel(&e.pose), e.overlap);
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_pairs(&self) -> Result<Vec<TrainingPair>> {
        self.entries.iter().map(ManifestEntry::load).collect()
    }
}
