//! Nearest-neighbor queries and the two point-set losses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use warpcomp::geometry::{nearest_neighbor, PointCloud, SpatialIndex, Vec3};
use warpcomp::losses::{chamfer_loss, l2_loss};

fn main() -> warpcomp::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts: Vec<Vec3> = (0..5000).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()) * 100.0).collect();
    let cloud = PointCloud::new(pts)?;
    let index = SpatialIndex::new(&cloud);
    let q = Vec3::new(50.0, 50.0, 50.0);
    let (i, d) = nearest_neighbor(&index, &q)?;
    println!("nearest to {q:?}: #{i} at {d:.3} mm");

    let shifted = PointCloud::new(cloud.iter().map(|p| p + Vec3::new(0.5, 0.0, 0.0)).collect())?;
    println!("l2 {:.4}  chamfer {:.4}", l2_loss(&shifted, &cloud)?, chamfer_loss(&shifted, &cloud)?);
    Ok(())
}
