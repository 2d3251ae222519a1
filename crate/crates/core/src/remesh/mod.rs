//! Isometric surface graphs from triangle meshes: voxelize, keep the
//! surface shell, then wrap it into a graph with near-uniform edge lengths.

mod graph;
mod voxel;
mod wrap;

pub use graph::{isometry_report, IsoGraph, IsometryReport};
pub use voxel::{surface_voxels, triangle_box_overlap, voxelize, SurfaceSet, VoxelGrid, MAX_CELLS};
pub use wrap::{diffusion_wrap, DIAGONAL_ACCEPTANCE};

use crate::error::Result;
use crate::geometry::TriangleMesh;

/// Bounding-box diagonal over 200.
pub fn default_voxel_size(mesh: &TriangleMesh) -> f64 {
    let (lo, hi) = mesh.bounds();
    (hi - lo).norm() / 200.0
}

/// `voxelize` → `surface_voxels` → `diffusion_wrap`.
pub fn remesh(mesh: &TriangleMesh, voxel_size: f64, seed: u64) -> Result<IsoGraph> {
    let grid = voxelize(mesh, voxel_size)?;
    let surface = surface_voxels(&grid)?;
    diffusion_wrap(&surface, seed)
}
