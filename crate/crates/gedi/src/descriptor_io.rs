//! Descriptor files.
//!
//! Layout, all little-endian: the magic `GEDF`, `u32` version (1), `u32`
//! count, `u32` dimension, `count × d` `f32` values, then `count` `u32`
//! indices of the described cloud points and `count` `u8` flags
//! ([`FLAG_FALLBACK_FRAME`]).

use std::fs;
use std::path::Path;

use gedi_core::encoder::Descriptor;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GEDF";
pub const VERSION: u32 = 1;
/// The patch frame could not be estimated and the identity was used.
pub const FLAG_FALLBACK_FRAME: u8 = 1;
/// Loaded descriptors must have unit norm within this tolerance.
pub const NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DescriptorFile {
    pub dim: usize,
    pub descriptors: Vec<Descriptor>,
    pub indices: Vec<u32>,
    pub flags: Vec<u8>,
}

impl DescriptorFile {
    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.len() * (4 * self.dim + 5));
        out.extend_from_slice(MAGIC);
        out.extend(VERSION.to_le_bytes());
        out.extend((self.len() as u32).to_le_bytes());
        out.extend((self.dim as u32).to_le_bytes());
        for d in &self.descriptors {
            for v in &d.values {
                out.extend(v.to_le_bytes());
            }
        }
        for i in &self.indices {
            out.extend(i.to_le_bytes());
        }
        out.extend_from_slice(&self.flags);
        out
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let err = |at: usize, m: String| Error::parse_byte(path, at, m);
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(err(0, "missing GEDF header".into()));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = word(4);
        if version != VERSION {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                message: format!("descriptor version {version}"),
            });
        }
        let (count, dim) = (word(8) as usize, word(12) as usize);
        let need = 16 + count * dim * 4 + count * 5;
        if bytes.len() != need {
            return Err(err(bytes.len().min(need), format!("expected {need} bytes, found {}", bytes.len())));
        }
        let mut descriptors = Vec::with_capacity(count);
        for k in 0..count {
            let at = 16 + k * dim * 4;
            let values: Vec<f32> =
                (0..dim).map(|j| f32::from_le_bytes(bytes[at + 4 * j..at + 4 * j + 4].try_into().unwrap())).collect();
            let d = Descriptor { values };
            if !((d.norm() - 1.0).abs() <= NORM_TOLERANCE) {
                return Err(err(at, format!("descriptor {k} has norm {}", d.norm())));
            }
            descriptors.push(d);
        }
        let base = 16 + count * dim * 4;
        let indices = (0..count).map(|k| word(base + 4 * k)).collect();
        let flags = bytes[base + 4 * count..].to_vec();
        Ok(DescriptorFile { dim, descriptors, indices, flags })
    }
}

pub fn save_descriptors(path: impl AsRef<Path>, file: &DescriptorFile) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, file.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_descriptors(path: impl AsRef<Path>) -> Result<DescriptorFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    DescriptorFile::from_bytes(path, &bytes)
}
