//! Recover a rigid scan pose with ICP, then build per-point correspondences.

use warpcomp::geometry::{apply_placement, resample_uniform, Placement, TriangleMesh, Vec3};
use warpcomp::registration::{align_scan, correspond};

fn main() -> warpcomp::Result<()> {
    let mesh = TriangleMesh::cuboid(Vec3::new(60.0, 25.0, 8.0));
    let cad = resample_uniform(&mesh, 2048, 0)?;
    let pose = Placement::from_axis_angle(Vec3::new(0.3, 1.0, 0.2), 0.4, Vec3::new(12.0, -7.0, 3.0))?;
    let scan = apply_placement(&resample_uniform(&mesh, 2048, 1)?, &pose)?;

    let (aligned, fit) = align_scan(&scan, &cad)?;
    println!("icp: rms {:.4} mm after {} iterations", fit.rms, fit.iterations);
    let residual = fit.placement.compose(&pose);
    println!("residual rotation {:.2e} rad", residual.angle());

    let c = correspond(&cad, &aligned)?;
    let worst = c.displacements.iter().map(|d| d.norm()).fold(0.0, f64::max);
    println!("{} correspondences, worst {:.3} mm", c.len(), worst);
    Ok(())
}
