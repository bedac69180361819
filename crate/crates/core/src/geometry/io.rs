//! XYZ, binary PLY and OFF readers; XYZ writer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Point3, PointCloud, TriangleMesh};
use crate::error::{Error, Result};

/// Parse ASCII XYZ text: one `x y z` triple per line. Blank lines and `#`
/// comments are skipped; extra columns are ignored.
pub fn parse_xyz(text: &str, origin: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<f64>);
        let mut next = || {
            it.next()
                .and_then(|r| r.ok())
                .ok_or_else(|| Error::format(origin, format!("line {}: expected three numbers", lineno + 1)))
        };
        points.push(Point3::new(next()?, next()?, next()?));
    }
    PointCloud::new(points).map_err(|e| Error::format(origin, e.to_string()))
}

pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_xyz(&text, path)
}

/// Render a cloud as XYZ text. Coordinates use the shortest round-trip form.
pub fn format_xyz(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(cloud.len() * 32);
    for p in cloud.points() {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    s
}

pub fn write_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    fs::write(path, format_xyz(cloud)).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq)]
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
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
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

struct PlyElement {
    name: String,
    count: usize,
    props: Vec<(String, Option<Scalar>)>,
}

/// Parse a binary little-endian PLY and return its `vertex` element x/y/z.
///
/// Elements before `vertex` must have fixed-size rows; list properties are
/// only tolerated in elements that come after it.
pub fn parse_ply_binary(bytes: &[u8], origin: &Path) -> Result<PointCloud> {
    const END: &[u8] = b"end_header";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::format(origin, "missing end_header"))?;
    let mut body = end + END.len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) != Some(&b'\n') {
        return Err(Error::format(origin, "end_header not followed by newline"));
    }
    body += 1;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::format(origin, "header is not UTF-8"))?;
    let mut lines = header.lines().map(str::trim);
    if lines.next() != Some("ply") {
        return Err(Error::format(origin, "missing 'ply' magic"));
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut format_ok = false;
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["format", "binary_little_endian", _] => format_ok = true,
            ["format", other, _] => return Err(Error::format(origin, format!("unsupported PLY format '{other}'"))),
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::format(origin, format!("bad element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", _, _, name] => elements
                .last_mut()
                .ok_or_else(|| Error::format(origin, "property before element"))?
                .props
                .push((name.to_string(), None)),
            ["property", ty, name] => {
                let s = Scalar::parse(ty).ok_or_else(|| Error::format(origin, format!("unknown type '{ty}'")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| Error::format(origin, "property before element"))?
                    .props
                    .push((name.to_string(), Some(s)));
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(Error::format(origin, format!("unrecognized header line '{line}'"))),
        }
    }
    if !format_ok {
        return Err(Error::format(origin, "missing format line"));
    }
    let mut offset = body;
    for el in &elements {
        let fixed: Option<Vec<Scalar>> = el.props.iter().map(|(_, s)| *s).collect();
        if el.name != "vertex" {
            let row: usize = fixed
                .ok_or_else(|| Error::format(origin, "list property before vertex element"))?
                .iter()
                .map(|s| s.size())
                .sum();
            offset += row * el.count;
            continue;
        }
        let types = fixed.ok_or_else(|| Error::format(origin, "list property in vertex element"))?;
        let mut col = [None; 3];
        let mut at = 0;
        for ((name, _), ty) in el.props.iter().zip(&types) {
            let slot = match name.as_str() {
                "x" => Some(0),
                "y" => Some(1),
                "z" => Some(2),
                _ => None,
            };
            if let Some(s) = slot {
                col[s] = Some((at, *ty));
            }
            at += ty.size();
        }
        let row = at;
        let [Some(cx), Some(cy), Some(cz)] = col else {
            return Err(Error::format(origin, "vertex element lacks x/y/z"));
        };
        let need = offset + row * el.count;
        if bytes.len() < need {
            return Err(Error::format(
                origin,
                format!("truncated: need {need} bytes, have {}", bytes.len()),
            ));
        }
        let mut points = Vec::with_capacity(el.count);
        for i in 0..el.count {
            let r = &bytes[offset + i * row..offset + (i + 1) * row];
            let get = |(o, t): (usize, Scalar)| t.read(&r[o..]);
            points.push(Point3::new(get(cx), get(cy), get(cz)));
        }
        return PointCloud::new(points).map_err(|e| Error::format(origin, e.to_string()));
    }
    Err(Error::format(origin, "no vertex element"))
}

pub fn read_ply_binary(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply_binary(&bytes, path)
}

/// Parse ASCII OFF. Polygons with more than three vertices are fan-triangulated.
pub fn parse_off(text: &str, origin: &Path) -> Result<TriangleMesh> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let bad = |what: &str| Error::format(origin, what.to_string());
    let magic = tokens.next().ok_or_else(|| bad("empty file"))?;
    // some writers glue the counts onto the magic ("OFF8 12 0")
    let mut pending: Option<&str> = None;
    if magic != "OFF" {
        match magic.strip_prefix("OFF") {
            Some(rest) if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) => pending = Some(rest),
            _ => return Err(bad("missing OFF header")),
        }
    }
    let mut next_num =
        |what: &str| -> Result<&str> { pending.take().or_else(|| tokens.next()).ok_or_else(|| bad(what)) };
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad count '{s}'")));
    let nv = parse_usize(next_num("missing vertex count")?)?;
    let nf = parse_usize(next_num("missing face count")?)?;
    let _ne = next_num("missing edge count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut c = [0.0; 3];
        for v in &mut c {
            let s = next_num("truncated vertex list")?;
            *v = s.parse().map_err(|_| bad(&format!("bad coordinate '{s}'")))?;
        }
        vertices.push(Point3::from_array(c));
    }
    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let k = parse_usize(next_num("truncated face list")?)?;
        let mut idx = Vec::with_capacity(k);
        for _ in 0..k {
            idx.push(parse_usize(next_num("truncated face")?)?);
        }
        if k < 3 {
            return Err(bad("face with fewer than 3 vertices"));
        }
        for j in 1..k - 1 {
            triangles.push([idx[0], idx[j], idx[j + 1]]);
        }
    }
    TriangleMesh::new(vertices, triangles).map_err(|e| Error::format(origin, e.to_string()))
}

pub fn read_off(path: &Path) -> Result<TriangleMesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_off(&text, path)
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default()
}

/// Read a mesh by extension (`.off`).
pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    match extension(path).as_str() {
        "off" => read_off(path),
        other => Err(Error::format(path, format!("unsupported mesh extension '{other}'"))),
    }
}

/// Read a point cloud by extension (`.xyz` or binary `.ply`).
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    match extension(path).as_str() {
        "xyz" | "txt" => read_xyz(path),
        "ply" => read_ply_binary(path),
        other => Err(Error::format(path, format!("unsupported cloud extension '{other}'"))),
    }
}
