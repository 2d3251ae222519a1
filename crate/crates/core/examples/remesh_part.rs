//! Voxelize a cuboid and wrap it into a near-isometric graph.
//!
//! cargo run --release --example remesh_part -- [voxel_size]

use warpcomp::geometry::{TriangleMesh, Vec3};
use warpcomp::remesh::{isometry_report, remesh};

fn main() -> warpcomp::Result<()> {
    let voxel: f64 = std::env::args().nth(1).map_or(2.0, |s| s.parse().expect("voxel size"));
    let mesh = TriangleMesh::cuboid(Vec3::new(40.0, 20.0, 10.0));
    let graph = remesh(&mesh, voxel, 0)?;
    let iso = isometry_report(&graph)?;
    println!("{} vertices, {} edges, {} faces", graph.len(), graph.edges().len(), graph.faces().len());
    println!("edge length mean {:.3} mm, cv {:.3}", iso.mean, iso.cv);
    println!("connected: {}", graph.is_connected());
    Ok(())
}
