//! ASCII OBJ and PLY reading and writing, plus run manifests.
//!
//! Floats are written in shortest round-trip form, so a write/read cycle
//! reproduces every value bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, TriangleMesh, Vec3};

pub(crate) fn fmt_f64(v: f64) -> String {
    // Debug is the shortest representation that parses back to the same bits.
    format!("{v:?}")
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    parse_obj(&std::fs::read_to_string(path)?, path)
}

/// Parses `v` and `f` records. Polygons are fan-triangulated; texture and
/// normal references (`f 1/2/3`) and negative indices are accepted; every
/// other record is ignored.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let err = |m: String| Error::parse(path, format!("line {}: {m}", ln + 1));
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let c: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|e| err(format!("bad coordinate {s:?}: {e}"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = parts
                    .map(|s| {
                        let head = s.split('/').next().unwrap_or("");
                        let i: i64 = head
                            .parse()
                            .map_err(|e| err(format!("bad face index {s:?}: {e}")))?;
                        let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        usize::try_from(resolved)
                            .map_err(|_| err(format!("face index {i} out of range")))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return Err(Error::parse(path, "no faces"));
    }
    TriangleMesh::new(vertices, faces).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn write_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, obj_string(mesh))?;
    Ok(())
}

pub fn obj_string(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z));
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

/// Contents of an ASCII PLY file: vertex properties by name, optional
/// faces, and header comments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlyData {
    pub comments: Vec<String>,
    pub vertex_properties: Vec<(String, Vec<f64>)>,
    pub faces: Vec<Vec<usize>>,
}

impl PlyData {
    pub fn from_cloud(cloud: &PointCloud) -> Self {
        let column = |a: usize| cloud.iter().map(|p| p[a]).collect();
        Self {
            comments: Vec::new(),
            vertex_properties: vec![
                ("x".into(), column(0)),
                ("y".into(), column(1)),
                ("z".into(), column(2)),
            ],
            faces: Vec::new(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_properties.first().map_or(0, |(_, v)| v.len())
    }

    pub fn property(&self, name: &str) -> Option<&[f64]> {
        self.vertex_properties
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn with_property(mut self, name: &str, values: Vec<f64>) -> Self {
        self.vertex_properties.push((name.into(), values));
        self
    }

    pub fn positions(&self) -> Result<Vec<Vec3>> {
        let get = |n: &str| {
            self.property(n)
                .ok_or_else(|| Error::Format(format!("PLY has no vertex property {n}")))
        };
        let (x, y, z) = (get("x")?, get("y")?, get("z")?);
        Ok((0..x.len()).map(|i| Vec3::new(x[i], y[i], z[i])).collect())
    }

    pub fn cloud(&self) -> Result<PointCloud> {
        PointCloud::new(self.positions()?)
    }

    pub fn to_ascii(&self) -> String {
        let n = self.vertex_count();
        let mut s = String::from("ply\nformat ascii 1.0\n");
        for c in &self.comments {
            let _ = writeln!(s, "comment {c}");
        }
        let _ = writeln!(s, "element vertex {n}");
        for (name, _) in &self.vertex_properties {
            let _ = writeln!(s, "property double {name}");
        }
        if !self.faces.is_empty() {
            let _ = writeln!(s, "element face {}", self.faces.len());
            s.push_str("property list uchar int vertex_indices\n");
        }
        s.push_str("end_header\n");
        for i in 0..n {
            let row: Vec<String> = self
                .vertex_properties
                .iter()
                .map(|(_, v)| fmt_f64(v[i]))
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        for f in &self.faces {
            let _ = write!(s, "{}", f.len());
            for i in f {
                let _ = write!(s, " {i}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_ascii())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let err = |ln: usize, m: &str| Error::parse(path, format!("line {}: {m}", ln + 1));
        match lines.next() {
            Some((_, l)) if l.trim() == "ply" => {}
            _ => return Err(Error::parse(path, "missing ply magic")),
        }
        let mut data = PlyData::default();
        let mut n_vertices = 0usize;
        let mut n_faces = 0usize;
        // Element currently being declared: 0 vertex, 1 face, 2 other.
        let mut current = 2u8;
        let mut other_elements = false;
        loop {
            let Some((ln, line)) = lines.next() else {
                return Err(Error::parse(path, "header is not terminated"));
            };
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["format", "ascii", _] => {}
                ["format", other, ..] => {
                    return Err(err(ln, &format!("unsupported PLY format {other}")));
                }
                ["comment", ..] => {
                    let rest = line.trim_start().strip_prefix("comment").unwrap_or("");
                    data.comments.push(rest.trim().to_string());
                }
                ["obj_info", ..] => {}
                ["element", "vertex", n] => {
                    n_vertices = n.parse().map_err(|_| err(ln, "bad vertex count"))?;
                    current = 0;
                }
                ["element", "face", n] => {
                    n_faces = n.parse().map_err(|_| err(ln, "bad face count"))?;
                    current = 1;
                }
                ["element", _, n] => {
                    if n.parse::<usize>().map_err(|_| err(ln, "bad element count"))? > 0 {
                        other_elements = true;
                    }
                    current = 2;
                }
                ["property", "list", _, _, _] if current == 1 => {}
                ["property", _, name] if current == 0 => {
                    data.vertex_properties.push((name.to_string(), Vec::with_capacity(n_vertices)));
                }
                ["property", ..] if current == 2 => {}
                ["end_header"] => break,
                _ => return Err(err(ln, &format!("unexpected header line {line:?}"))),
            }
        }
        if other_elements {
            return Err(Error::parse(path, "unsupported PLY element"));
        }
        let n_props = data.vertex_properties.len();
        for _ in 0..n_vertices {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(path, "truncated vertex list"))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| err(ln, &format!("bad number {s:?}"))))
                .collect::<Result<_>>()?;
            if vals.len() != n_props {
                return Err(err(ln, &format!("expected {n_props} values, got {}", vals.len())));
            }
            for (slot, v) in data.vertex_properties.iter_mut().zip(vals) {
                slot.1.push(v);
            }
        }
        for _ in 0..n_faces {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| Error::parse(path, "truncated face list"))?;
            let vals: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse::<usize>().map_err(|_| err(ln, &format!("bad index {s:?}"))))
                .collect::<Result<_>>()?;
            match vals.split_first() {
                Some((&k, rest)) if k == rest.len() && k >= 3 => {
                    if rest.iter().any(|&i| i >= n_vertices) {
                        return Err(err(ln, "face index out of range"));
                    }
                    data.faces.push(rest.to_vec());
                }
                _ => return Err(err(ln, "malformed face record")),
            }
        }
        Ok(data)
    }
}

pub fn write_cloud_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    PlyData::from_cloud(cloud).write(path)
}

pub fn read_cloud_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    PlyData::read(path)?
        .cloud()
        .map_err(|e| Error::parse(path, e.to_string()))
}

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Ordered `key=value` text record of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key, value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut m = Self::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, format!("line {}: expected key=value", n + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::parse(path, format!("line {}: empty key", n + 1)));
            }
            if m.get(k).is_some() {
                return Err(Error::parse(path, format!("line {}: duplicate key {k:?}", n + 1)));
            }
            m.set(k, v.trim());
        }
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path)?, path)
    }
}
