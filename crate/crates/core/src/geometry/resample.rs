use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PointCloud, SpatialIndex, TriangleMesh, Vec3};
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_COUNT: usize = 2048;

const LLOYD_ITERATIONS: usize = 5;
const MIN_CANDIDATES: usize = 20_000;
const CANDIDATES_PER_SAMPLE: usize = 8;

/// Draws `k` points on the mesh surface.
///
/// A dense candidate set is sampled area-proportionally, then `k` seeds are
/// relaxed with Lloyd iterations restricted to that candidate set, so every
/// output point is an exact surface sample.
pub fn resample_uniform(mesh: &TriangleMesh, k: usize, seed: u64) -> Result<PointCloud> {
    if k < 1 {
        return Err(Error::InvalidArgument("sample count k must be at least 1".into()));
    }
    let areas: Vec<f64> = (0..mesh.faces().len()).map(|f| mesh.face_area(f)).collect();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateMesh("mesh has zero surface area".into()));
    }
    let picker = WeightedIndex::new(&areas)
        .map_err(|e| Error::DegenerateMesh(format!("face areas unusable: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_candidates = MIN_CANDIDATES.max(CANDIDATES_PER_SAMPLE * k);
    let candidates: Vec<Vec3> = (0..n_candidates)
        .map(|_| {
            let [a, b, c] = mesh.triangle(picker.sample(&mut rng));
            let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
            let s = r1.sqrt();
            let (u, v) = (s * (1.0 - r2), s * r2);
            a + (b - a) * u + (c - a) * v
        })
        .collect();

    // Candidates are i.i.d., so the first k already form an unbiased start.
    let mut seeds: Vec<usize> = (0..k).collect();
    let candidate_index = SpatialIndex::from_points(candidates.clone());
    let mut taken = vec![false; n_candidates];
    for &s in &seeds {
        taken[s] = true;
    }
    for _ in 0..LLOYD_ITERATIONS {
        let seed_index = SpatialIndex::from_points(seeds.iter().map(|&s| candidates[s]).collect());
        let mut sums = vec![Vec3::zeros(); k];
        let mut counts = vec![0usize; k];
        for c in &candidates {
            let (owner, _) = seed_index.nearest_squared(c)?;
            sums[owner] += c;
            counts[owner] += 1;
        }
        for i in 0..k {
            if counts[i] == 0 {
                continue;
            }
            let centroid = sums[i] / counts[i] as f64;
            let (next, _) = candidate_index.nearest_squared(&centroid)?;
            if !taken[next] {
                taken[seeds[i]] = false;
                taken[next] = true;
                seeds[i] = next;
            }
        }
    }
    PointCloud::new(seeds.into_iter().map(|s| candidates[s]).collect())
}
