//! ASCII OBJ and ASCII / binary little-endian PLY readers and writers.

use std::fs;
use std::path::Path;

use nalgebra::Point3;

use super::Mesh;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    PlyAscii,
    PlyBinary,
}

impl MeshFormat {
    /// Guess from the file extension; PLY defaults to ASCII on write.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::PlyAscii),
            _ => None,
        }
    }
}

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match MeshFormat::from_path(path) {
        Some(MeshFormat::Obj) => parse_obj(path, &bytes),
        Some(_) => parse_ply(path, &bytes),
        None => Err(Error::Parse {
            path: path.into(),
            position: "0".into(),
            message: "unknown mesh extension (expected .obj or .ply)".into(),
        }),
    }
}

pub fn save_mesh(mesh: &Mesh, path: &Path, format: MeshFormat) -> Result<()> {
    let bytes = match format {
        MeshFormat::Obj => write_obj(mesh).into_bytes(),
        MeshFormat::PlyAscii => write_ply_ascii(mesh).into_bytes(),
        MeshFormat::PlyBinary => write_ply_binary(mesh),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, position: impl ToString, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        position: position.to_string(),
        message: message.into(),
    }
}

fn parse_obj(path: &Path, bytes: &[u8]) -> Result<Mesh> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut vertices = Vec::new();
    let mut faces: Vec<([usize; 3], usize)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let coords: Vec<f64> = parts
                    .take(3)
                    .map(|p| p.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(path, lineno, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(parse_err(path, lineno, "vertex needs three coordinates"));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let refs: Vec<&str> = parts.collect();
                if refs.len() != 3 {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("non-triangular face with {} vertices", refs.len()),
                    ));
                }
                let mut tri = [0usize; 3];
                for (k, r) in refs.iter().enumerate() {
                    let idx: i64 = r
                        .split('/')
                        .next()
                        .unwrap_or("")
                        .parse()
                        .map_err(|e| parse_err(path, lineno, format!("bad face index '{r}': {e}")))?;
                    // OBJ indices are 1-based; negative values count back from the end.
                    let resolved = if idx > 0 {
                        idx - 1
                    } else {
                        vertices.len() as i64 + idx
                    };
                    if idx == 0 || resolved < 0 {
                        return Err(parse_err(path, lineno, format!("face index {idx} out of range")));
                    }
                    tri[k] = resolved as usize;
                }
                faces.push((tri, lineno));
            }
            _ => {}
        }
    }
    for (tri, lineno) in &faces {
        if let Some(&bad) = tri.iter().find(|&&i| i >= vertices.len()) {
            return Err(parse_err(
                path,
                lineno,
                format!("face index {} out of range ({} vertices)", bad + 1, vertices.len()),
            ));
        }
    }
    let triangles = faces.into_iter().map(|(t, _)| t).collect();
    Mesh::new(vertices, triangles)
}

fn write_obj(mesh: &Mesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in mesh.triangles() {
        out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    out
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
    fn parse(name: &str) -> Option<Self> {
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

    fn read_le(self, b: &[u8]) -> f64 {
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

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

fn parse_ply(path: &Path, bytes: &[u8]) -> Result<Mesh> {
    let header_end = find_subsequence(bytes, b"end_header")
        .ok_or_else(|| parse_err(path, 1, "missing end_header"))?;
    let mut body_start = header_end + b"end_header".len();
    if bytes.get(body_start) == Some(&b'\r') {
        body_start += 1;
    }
    if bytes.get(body_start) == Some(&b'\n') {
        body_start += 1;
    }
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|e| parse_err(path, 1, e.to_string()))?;

    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(parse_err(path, 1, "missing 'ply' magic"));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let lineno = lineno + 2;
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["format", "ascii", "1.0"] => binary = Some(false),
            ["format", "binary_little_endian", "1.0"] => binary = Some(true),
            ["format", other, ..] => {
                return Err(parse_err(path, lineno, format!("unsupported PLY format '{other}'")))
            }
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "bad element count"))?,
                properties: Vec::new(),
            }),
            ["property", "list", ct, it, name] => {
                let (Some(ct), Some(it)) = (Scalar::parse(ct), Scalar::parse(it)) else {
                    return Err(parse_err(path, lineno, "unknown list property type"));
                };
                elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, lineno, "property before element"))?
                    .properties
                    .push(Property::List(name.to_string(), ct, it));
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| parse_err(path, lineno, format!("unknown property type '{ty}'")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, lineno, "property before element"))?
                    .properties
                    .push(Property::Scalar(name.to_string(), ty));
            }
            _ => {}
        }
    }
    let binary = binary.ok_or_else(|| parse_err(path, 2, "missing format line"))?;

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let body = &bytes[body_start..];
    let mut reader = if binary {
        Reader::Binary { data: body, pos: 0 }
    } else {
        let text = std::str::from_utf8(body).map_err(|e| parse_err(path, "body", e.to_string()))?;
        Reader::Ascii {
            tokens: text.split_whitespace().collect(),
            pos: 0,
        }
    };

    for el in &elements {
        for record in 0..el.count {
            let position = format!("{} {record}", el.name);
            let mut xyz = [f64::NAN; 3];
            let mut face: Option<Vec<f64>> = None;
            for prop in &el.properties {
                match prop {
                    Property::Scalar(name, ty) => {
                        let v = reader
                            .scalar(*ty)
                            .ok_or_else(|| parse_err(path, &position, "truncated record"))?;
                        match name.as_str() {
                            "x" => xyz[0] = v,
                            "y" => xyz[1] = v,
                            "z" => xyz[2] = v,
                            _ => {}
                        }
                    }
                    Property::List(name, ct, it) => {
                        let n = reader
                            .scalar(*ct)
                            .ok_or_else(|| parse_err(path, &position, "truncated list"))?
                            as usize;
                        let mut vals = Vec::with_capacity(n);
                        for _ in 0..n {
                            vals.push(
                                reader
                                    .scalar(*it)
                                    .ok_or_else(|| parse_err(path, &position, "truncated list"))?,
                            );
                        }
                        if name == "vertex_indices" || name == "vertex_index" {
                            face = Some(vals);
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => {
                    if xyz.iter().any(|v| v.is_nan()) {
                        return Err(parse_err(path, &position, "vertex lacks x/y/z"));
                    }
                    vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
                }
                "face" => {
                    let idx = face.ok_or_else(|| parse_err(path, &position, "face lacks vertex_indices"))?;
                    if idx.len() != 3 {
                        return Err(parse_err(
                            path,
                            &position,
                            format!("non-triangular face with {} vertices", idx.len()),
                        ));
                    }
                    let mut tri = [0usize; 3];
                    for (k, &i) in idx.iter().enumerate() {
                        if i < 0.0 || i as usize >= vertices.len() {
                            return Err(parse_err(
                                path,
                                &position,
                                format!("face index {i} out of range ({} vertices)", vertices.len()),
                            ));
                        }
                        tri[k] = i as usize;
                    }
                    triangles.push(tri);
                }
                _ => {}
            }
        }
    }
    Mesh::new(vertices, triangles)
}

enum Reader<'a> {
    Ascii { tokens: Vec<&'a str>, pos: usize },
    Binary { data: &'a [u8], pos: usize },
}

impl Reader<'_> {
    fn scalar(&mut self, ty: Scalar) -> Option<f64> {
        match self {
            Reader::Ascii { tokens, pos } => {
                let t = tokens.get(*pos)?;
                *pos += 1;
                t.parse().ok()
            }
            Reader::Binary { data, pos } => {
                let n = ty.size();
                let slice = data.get(*pos..*pos + n)?;
                *pos += n;
                Some(ty.read_le(slice))
            }
        }
    }
}

fn find_subsequence(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

fn ply_header(mesh: &Mesh, format: &str) -> String {
    format!(
        "ply\nformat {format} 1.0\nelement vertex {}\nproperty double x\nproperty double y\n\
         property double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertex_count(),
        mesh.triangles().len()
    )
}

fn write_ply_ascii(mesh: &Mesh) -> String {
    let mut out = ply_header(mesh, "ascii");
    for v in mesh.vertices() {
        out.push_str(&format!("{} {} {}\n", v.x, v.y, v.z));
    }
    for t in mesh.triangles() {
        out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    out
}

fn write_ply_binary(mesh: &Mesh) -> Vec<u8> {
    let mut out = ply_header(mesh, "binary_little_endian").into_bytes();
    for v in mesh.vertices() {
        for c in [v.x, v.y, v.z] {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for t in mesh.triangles() {
        out.push(3u8);
        for &i in t {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    out
}
