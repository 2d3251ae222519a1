//! Synthetic bar datasets printed through the warp oracle.

use crate::error::{Error, Result};
use crate::geometry::{ChamberSpec, Placement, TriangleMesh, Vec3};
use crate::oracle::{simulate_print, WarpSpec};
use crate::remesh::{remesh, IsoGraph};
use crate::trainer::{Dataset, Sample, Split};

/// Bar length, width and height in mm.
pub const BAR_SIZE: [f64; 3] = [100.0, 12.0, 6.0];
/// Gives roughly 750 graph vertices per bar.
pub const BAR_VOXEL_SIZE: f64 = 2.2;
/// Offsets of the two bar columns along x from the chamber center.
pub const BAR_COLUMNS: [f64; 2] = [-50.0, 50.0];
/// Offsets of the six bar rows along y from the chamber center.
pub const BAR_ROWS: [f64; 6] = [-120.0, -72.0, -24.0, 24.0, 72.0, 120.0];
/// Placements kept out of training in the default layout.
pub const HELD_OUT: [usize; 2] = [4, 9];

pub fn bar_mesh() -> TriangleMesh {
    TriangleMesh::cuboid(Vec3::from(BAR_SIZE))
}

/// Twelve axis-aligned bar placements at mid height, indexed `row · 2 + column`.
pub fn bar_layout(chamber: &ChamberSpec) -> Vec<Placement> {
    let c = chamber.center();
    BAR_ROWS
        .iter()
        .flat_map(|&dy| BAR_COLUMNS.iter().map(move |&dx| Placement::translation(Vec3::new(c.x + dx, c.y + dy, c.z))))
        .collect()
}

/// Scanner-noise seed for one part, derived from the run seed.
pub fn part_seed(seed: u64, part_id: usize) -> u64 {
    seed ^ (part_id as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Places `graph` (part frame) at every placement and prints each copy.
/// Parts listed in `held_out` go to the validation split.
pub fn build_dataset(graph: &IsoGraph, placements: &[Placement], held_out: &[usize], spec: &WarpSpec) -> Result<Dataset> {
    if let Some(&bad) = held_out.iter().find(|&&i| i >= placements.len()) {
        return Err(Error::InvalidArgument(format!(
            "held-out part {bad} is outside the {} placements",
            placements.len()
        )));
    }
    let mut samples = Vec::with_capacity(placements.len());
    for (id, pl) in placements.iter().enumerate() {
        let placed = graph.placed(pl);
        let cad = placed.cloud()?;
        let scan = simulate_print(
            &cad,
            &WarpSpec {
                seed: part_seed(spec.seed, id),
                ..*spec
            },
        )?;
        let split = if held_out.contains(&id) { Split::Validation } else { Split::Train };
        samples.push(Sample::new(id, placed, cad, scan, *pl, split)?);
    }
    Dataset::new(samples)
}

/// The bar graph in its own frame.
pub fn bar_graph(voxel_size: f64, seed: u64) -> Result<IsoGraph> {
    remesh(&bar_mesh(), voxel_size, seed)
}

/// The default twelve-bar dataset.
pub fn bar_dataset(spec: &WarpSpec, voxel_size: f64, seed: u64) -> Result<Dataset> {
    let graph = bar_graph(voxel_size, seed)?;
    build_dataset(&graph, &bar_layout(&spec.chamber), &HELD_OUT, spec)
}
