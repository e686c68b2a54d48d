//! Point-cloud files: ASCII XYZ and binary little-endian PLY.
//!
//! The format is chosen by extension: `.ply` is PLY, anything else is read
//! as whitespace-separated `x y z` lines (further columns are ignored, blank
//! lines and `#` comments are skipped).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use gedi_core::{PointCloud, Vec3};

use crate::error::{Error, Result};

fn is_ply(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ply"))
}

pub fn load_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if is_ply(path) {
        parse_ply(path, &bytes)
    } else {
        parse_xyz(path, &bytes)
    }
}

/// Writes XYZ or PLY by extension; `colors` are only stored in PLY.
pub fn save_cloud(path: impl AsRef<Path>, cloud: &PointCloud, colors: Option<&[[u8; 3]]>) -> Result<()> {
    let path = path.as_ref();
    if let Some(c) = colors {
        if c.len() != cloud.len() {
            return Err(Error::Config(format!("{} colours for {} points", c.len(), cloud.len())));
        }
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = if is_ply(path) { write_ply(&mut w, cloud, colors) } else { write_xyz(&mut w, cloud) };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_xyz(w: &mut impl Write, cloud: &PointCloud) -> std::io::Result<()> {
    for p in cloud.points() {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

fn write_ply(w: &mut impl Write, cloud: &PointCloud, colors: Option<&[[u8; 3]]>) -> std::io::Result<()> {
    writeln!(w, "ply\nformat binary_little_endian 1.0\nelement vertex {}", cloud.len())?;
    writeln!(w, "property float x\nproperty float y\nproperty float z")?;
    if colors.is_some() {
        writeln!(w, "property uchar red\nproperty uchar green\nproperty uchar blue")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points().iter().enumerate() {
        for v in [p.x, p.y, p.z] {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        if let Some(c) = colors {
            w.write_all(&c[i])?;
        }
    }
    Ok(())
}

fn parse_xyz(path: &Path, bytes: &[u8]) -> Result<PointCloud> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse_byte(path, e.valid_up_to(), "invalid UTF-8"))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut xyz = [0.0; 3];
        for v in &mut xyz {
            let f = fields.next().ok_or_else(|| Error::parse_line(path, i + 1, "expected three coordinates"))?;
            *v = f.parse().map_err(|_| Error::parse_line(path, i + 1, format!("bad number {f:?}")))?;
        }
        points.push(Vec3::from_array(xyz));
    }
    Ok(PointCloud::new(points))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Element {
    name: String,
    count: usize,
    props: Vec<(String, Scalar)>,
    has_list: bool,
}

fn parse_ply(path: &Path, bytes: &[u8]) -> Result<PointCloud> {
    let unsupported = |m: &str| Error::UnsupportedFormat { path: path.to_path_buf(), message: m.into() };
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::parse_byte(path, 0, "missing end_header"))?;
    let body_start = bytes[end..]
        .iter()
        .position(|&c| c == b'\n')
        .map(|p| end + p + 1)
        .ok_or_else(|| Error::parse_byte(path, end, "unterminated header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::parse_byte(path, 0, "header is not ASCII"))?;

    let mut lines = header.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some("ply") {
        return Err(Error::parse_line(path, 1, "missing ply magic"));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut format_ok = false;
    for (i, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", "binary_little_endian", _] => format_ok = true,
            ["format", other, _] => return Err(unsupported(&format!("PLY encoding {other}"))),
            ["element", name, count] => {
                let count = count.parse().map_err(|_| Error::parse_line(path, i + 1, "bad element count"))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new(), has_list: false });
            }
            ["property", "list", ..] => {
                elements
                    .last_mut()
                    .ok_or_else(|| Error::parse_line(path, i + 1, "property before element"))?
                    .has_list = true;
            }
            ["property", ty, name] => {
                let ty =
                    Scalar::parse(ty).ok_or_else(|| Error::parse_line(path, i + 1, format!("unknown type {ty}")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| Error::parse_line(path, i + 1, "property before element"))?
                    .props
                    .push((name.to_string(), ty));
            }
            _ => return Err(Error::parse_line(path, i + 1, format!("unexpected header line {line:?}"))),
        }
    }
    if !format_ok {
        return Err(unsupported("only binary_little_endian PLY is supported"));
    }
    let mut offset = body_start;
    for el in &elements {
        let stride: usize = el.props.iter().map(|(_, t)| t.size()).sum();
        if el.name != "vertex" {
            if el.has_list {
                return Err(unsupported("list properties before the vertex element"));
            }
            offset += stride * el.count;
            continue;
        }
        if el.has_list {
            return Err(unsupported("list properties in the vertex element"));
        }
        let mut at = [None; 3];
        let mut o = 0;
        for (name, ty) in &el.props {
            if let Some(k) = ["x", "y", "z"].iter().position(|a| a == name) {
                at[k] = Some((o, *ty));
            }
            o += ty.size();
        }
        let [Some(ax), Some(ay), Some(az)] = at else {
            return Err(Error::parse_byte(path, body_start, "vertex element lacks x/y/z"));
        };
        let need = offset + stride * el.count;
        if bytes.len() < need {
            return Err(Error::parse_byte(path, bytes.len(), format!("truncated vertex data, expected {need} bytes")));
        }
        let points = (0..el.count)
            .map(|i| {
                let row = &bytes[offset + i * stride..offset + (i + 1) * stride];
                let get = |(o, t): (usize, Scalar)| t.read(&row[o..]);
                Vec3::new(get(ax), get(ay), get(az))
            })
            .collect();
        return Ok(PointCloud::new(points));
    }
    Err(Error::parse_byte(path, body_start, "no vertex element"))
}
