//! Model checkpoints.
//!
//! Layout, little-endian: magic `GEDI`, `u32` version (1), `u32` record
//! count, then `(u32 name length, name, f64 value)` records describing the
//! architecture (plus any extra metadata), `u32` tensor count, then
//! `(u32 name length, name, u32 rank, rank × u32 dims, f32 values)` per
//! tensor, and finally the CRC32 of all preceding bytes.

use std::fs;
use std::path::Path;

use gedi_core::encoder::{EncoderConfig, EncoderModel};
use gedi_core::tensor::Tensor;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GEDI";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: EncoderModel,
    /// Records that are not part of the architecture, e.g. `train.iteration`.
    pub metadata: Vec<(String, f64)>,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend((s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn to_bytes(model: &EncoderModel, metadata: &[(String, f64)]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend(VERSION.to_le_bytes());
    let records: Vec<(String, f64)> = model.config().to_records().into_iter().chain(metadata.iter().cloned()).collect();
    out.extend((records.len() as u32).to_le_bytes());
    for (name, v) in &records {
        put_str(&mut out, name);
        out.extend(v.to_le_bytes());
    }
    out.extend((model.params.len() as u32).to_le_bytes());
    for (name, t) in model.params.iter() {
        put_str(&mut out, name);
        out.extend((t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend((d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend(v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend(crc.to_le_bytes());
    out
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.at < n {
            return Err(Error::parse_byte(self.path, self.at, "unexpected end of checkpoint"));
        }
        self.at += n;
        Ok(&self.bytes[self.at - n..self.at])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let at = self.at;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::parse_byte(self.path, at, "name is not UTF-8"))
    }
}

pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::parse_byte(path, 0, "missing GEDI header"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { path: path.into(), stored, computed });
    }
    let mut r = Reader { path, bytes: body, at: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedFormat { path: path.into(), message: format!("checkpoint version {version}") });
    }
    let n_records = r.u32()?;
    let mut records = Vec::new();
    for _ in 0..n_records {
        let name = r.string()?;
        let v = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
        records.push((name, v));
    }
    let config = EncoderConfig::from_records(&records)?;
    let arch: Vec<String> = config.to_records().into_iter().map(|(n, _)| n).collect();
    let metadata = records.into_iter().filter(|(n, _)| !arch.contains(n)).collect();
    let n_tensors = r.u32()?;
    let mut tensors = Vec::new();
    for _ in 0..n_tensors {
        let name = r.string()?;
        let rank = r.u32()? as usize;
        let shape: Vec<usize> = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        let numel: usize = shape.iter().product();
        let data = r.take(numel * 4)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        tensors.push((name, Tensor::new(&shape, data)?));
    }
    if r.at != body.len() {
        return Err(Error::parse_byte(path, r.at, "trailing bytes after tensors"));
    }
    Ok(Checkpoint { model: EncoderModel::from_parts(config, tensors)?, metadata })
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &EncoderModel, metadata: &[(String, f64)]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model, metadata)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(path, &bytes)
}
