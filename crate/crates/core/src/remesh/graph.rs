use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::autodiff::Adjacency;
use crate::error::{Error, Result};
use crate::geometry::{Placement, PointCloud, Vec3};
use crate::io::PlyData;

/// Surface mesh used as the message-passing graph.
#[derive(Debug, Clone, PartialEq)]
pub struct IsoGraph {
    vertices: Vec<Vec3>,
    edges: Vec<[usize; 2]>,
    faces: Vec<[usize; 3]>,
    neighbors: Vec<Vec<usize>>,
}

impl IsoGraph {
    /// Edges are normalized to `i < j`, sorted and deduplicated; neighbor
    /// lists are derived from them and sorted.
    pub fn new(vertices: Vec<Vec3>, edges: Vec<[usize; 2]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        let mut set = BTreeSet::new();
        for [a, b] in edges {
            if a >= n || b >= n {
                return Err(Error::Index(format!("edge ({a}, {b}) beyond {n} vertices")));
            }
            if a == b {
                return Err(Error::DegenerateMesh(format!("self-loop at vertex {a}")));
            }
            set.insert([a.min(b), a.max(b)]);
        }
        for f in &faces {
            if f.iter().any(|&i| i >= n) {
                return Err(Error::Index(format!("face {f:?} beyond {n} vertices")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateMesh(format!("face {f:?} repeats a vertex")));
            }
        }
        let edges: Vec<[usize; 2]> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); n];
        for &[a, b] in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        neighbors.iter_mut().for_each(|l| l.sort_unstable());
        Ok(Self {
            vertices,
            edges,
            faces,
            neighbors,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn neighbor_lists(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn cloud(&self) -> Result<PointCloud> {
        PointCloud::new(self.vertices.clone())
    }

    /// Neighbor lists for the gather-mean primitive; fails on isolated vertices.
    pub fn adjacency(&self) -> Result<Arc<Adjacency>> {
        Adjacency::new(&self.neighbors).map(Arc::new)
    }

    /// Same connectivity with vertices moved by a rigid placement.
    pub fn placed(&self, placement: &Placement) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| placement.apply(v)).collect(),
            ..self.clone()
        }
    }

    /// Same connectivity with new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Alignment {
                expected: self.vertices.len(),
                found: vertices.len(),
            });
        }
        Ok(Self {
            vertices,
            ..self.clone()
        })
    }

    /// Number of connected components (isolated vertices count as one each).
    pub fn component_count(&self) -> usize {
        let n = self.vertices.len();
        let mut seen = vec![false; n];
        let mut count = 0;
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &w in &self.neighbors[u] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() == 1
    }

    /// Edges that belong to no face.
    pub fn faceless_edges(&self) -> Vec<[usize; 2]> {
        let in_face: BTreeSet<[usize; 2]> = self
            .faces
            .iter()
            .flat_map(|f| [[f[0], f[1]], [f[1], f[2]], [f[2], f[0]]])
            .map(|[a, b]| [a.min(b), a.max(b)])
            .collect();
        self.edges.iter().filter(|e| !in_face.contains(*e)).copied().collect()
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edges
            .iter()
            .map(|&[a, b]| (self.vertices[a] - self.vertices[b]).norm())
            .collect()
    }

    /// Sidecar edge-list path next to a graph PLY.
    pub fn edges_path(path: &Path) -> PathBuf {
        path.with_extension("edges")
    }

    /// Writes the vertices and faces as PLY and the edges to the sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut ply = PlyData::from_cloud(&self.cloud()?);
        ply.faces = self.faces.iter().map(|f| f.to_vec()).collect();
        ply.write(path)?;
        let mut s = String::with_capacity(self.edges.len() * 12);
        for [a, b] in &self.edges {
            let _ = writeln!(s, "{a} {b}");
        }
        std::fs::write(Self::edges_path(path), s)?;
        Ok(())
    }

    /// Reads a graph PLY. Edges come from the sidecar when present,
    /// otherwise from the face boundaries.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let ply = PlyData::read(path)?;
        let vertices = ply.positions().map_err(|e| Error::parse(path, e.to_string()))?;
        let mut faces = Vec::with_capacity(ply.faces.len());
        for f in &ply.faces {
            if f.len() != 3 {
                return Err(Error::parse(path, "graph faces must be triangles"));
            }
            faces.push([f[0], f[1], f[2]]);
        }
        let sidecar = Self::edges_path(path);
        let edges = if sidecar.exists() {
            let text = std::fs::read_to_string(&sidecar)?;
            let mut edges = Vec::new();
            for (ln, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let ij: Vec<usize> = line
                    .split_whitespace()
                    .map(|t| t.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(&sidecar, format!("line {}: bad edge", ln + 1)))?;
                if ij.len() != 2 {
                    return Err(Error::parse(&sidecar, format!("line {}: expected `i j`", ln + 1)));
                }
                edges.push([ij[0], ij[1]]);
            }
            edges
        } else {
            faces
                .iter()
                .flat_map(|f| [[f[0], f[1]], [f[1], f[2]], [f[2], f[0]]])
                .collect()
        };
        Self::new(vertices, edges, faces).map_err(|e| Error::parse(path, e.to_string()))
    }
}

/// Population statistics of the edge lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsometryReport {
    pub mean: f64,
    pub std: f64,
    /// `std / mean`.
    pub cv: f64,
}

pub fn isometry_report(graph: &IsoGraph) -> Result<IsometryReport> {
    edge_length_stats(&graph.edge_lengths())
}

pub(crate) fn edge_length_stats(lengths: &[f64]) -> Result<IsometryReport> {
    if lengths.is_empty() {
        return Err(Error::InvalidArgument("graph has no edges".into()));
    }
    let n = lengths.len() as f64;
    let mean = lengths.iter().sum::<f64>() / n;
    let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok(IsometryReport {
        mean,
        std,
        cv: std / mean,
    })
}
