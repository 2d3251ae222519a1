//! Rigid alignment of scans to CAD clouds and per-point displacement
//! correspondences.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{apply_placement, Placement, PointCloud, SpatialIndex, Vec3};
use crate::io::fmt_f64;

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-6;
/// Fraction of worst matches discarded in every ICP iteration.
pub const TRIM_FRACTION: f64 = 0.05;

/// Fits whose RMS is within this fraction of the best count as equally good.
pub const RMS_TIE_FRACTION: f64 = 1e-3;

/// Smallest-to-largest principal variance ratio below which a cloud counts
/// as planar.
const PLANARITY_RATIO: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RigidFit {
    /// Maps scan points into the CAD frame.
    pub placement: Placement,
    /// Root mean square of the retained (trimmed) nearest-neighbor residuals, mm.
    pub rms: f64,
    pub iterations: usize,
    /// RMS before the first iteration and after each one; non-increasing.
    pub history: Vec<f64>,
}

/// Coarse PCA alignment followed by trimmed point-to-point ICP.
///
/// Several coarse starts are tried (centroid match alone and the four
/// proper sign choices of the principal frames); the lowest final RMS wins.
/// Symmetric parts fit equally well in several poses, so among fits within
/// [`RMS_TIE_FRACTION`] of the best the smallest rotation is returned.
pub fn icp_align(scan: &PointCloud, cad: &PointCloud, max_iter: usize, tol: f64) -> Result<RigidFit> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be non-negative, got {tol}")));
    }
    let (scan_c, scan_axes) = principal_frame(scan, "scan")?;
    let (cad_c, cad_axes) = principal_frame(cad, "cad")?;
    let index = SpatialIndex::new(cad);

    let mut starts = vec![Placement::translation(cad_c - scan_c)];
    for signs in [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]] {
        let s = Matrix3::from_diagonal(&Vec3::new(signs[0], signs[1], signs[0] * signs[1]));
        let r = cad_axes * s * scan_axes.transpose();
        // Both frames are right-handed, so r is a proper rotation.
        let r = orthonormalize(&r);
        starts.push(Placement::new(r, cad_c - r * scan_c)?);
    }

    let fits = starts
        .into_iter()
        .map(|start| refine(scan, &index, start, max_iter, tol))
        .collect::<Result<Vec<_>>>()?;
    let best_rms = fits.iter().map(|f| f.rms).fold(f64::INFINITY, f64::min);
    let tie = best_rms * (1.0 + RMS_TIE_FRACTION) + 1e-9;
    let best = fits
        .into_iter()
        .filter(|f| f.rms <= tie)
        .min_by(|a, b| a.placement.angle().total_cmp(&b.placement.angle()))
        .expect("at least one start");
    Ok(best)
}

fn refine(scan: &PointCloud, index: &SpatialIndex, start: Placement, max_iter: usize, tol: f64) -> Result<RigidFit> {
    let n = scan.len();
    let keep = n - ((n as f64) * TRIM_FRACTION).floor() as usize;
    let mut current = start;
    let mut matches = trimmed_matches(scan, index, &current, keep)?;
    let mut rms = matches.rms;
    let mut history = vec![rms];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let src: Vec<Vec3> = matches.pairs.iter().map(|&(i, _)| scan.points()[i]).collect();
        let dst: Vec<Vec3> = matches.pairs.iter().map(|&(_, j)| index.points()[j]).collect();
        let candidate = kabsch(&src, &dst)?;
        let next = trimmed_matches(scan, index, &candidate, keep)?;
        if next.rms > rms {
            // Only rounding can raise the objective; keep the better pose.
            break;
        }
        let change = rms - next.rms;
        current = candidate;
        rms = next.rms;
        matches = next;
        history.push(rms);
        if change < tol {
            break;
        }
    }
    Ok(RigidFit {
        placement: current,
        rms,
        iterations,
        history,
    })
}

struct Matches {
    pairs: Vec<(usize, usize)>,
    rms: f64,
}

fn trimmed_matches(scan: &PointCloud, index: &SpatialIndex, pose: &Placement, keep: usize) -> Result<Matches> {
    let mut all: Vec<(f64, usize, usize)> = Vec::with_capacity(scan.len());
    for (i, p) in scan.iter().enumerate() {
        let (j, d2) = index.nearest_squared(&pose.apply(p))?;
        all.push((d2, i, j));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(keep);
    let sum: f64 = all.iter().map(|m| m.0).sum();
    Ok(Matches {
        rms: (sum / keep as f64).sqrt(),
        pairs: all.into_iter().map(|(_, i, j)| (i, j)).collect(),
    })
}

/// Least-squares rotation and translation taking `src` onto `dst`, with the
/// reflection case corrected.
pub fn kabsch(src: &[Vec3], dst: &[Vec3]) -> Result<Placement> {
    if src.len() != dst.len() || src.is_empty() {
        return Err(Error::Alignment {
            expected: src.len(),
            found: dst.len(),
        });
    }
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vec3>() / n;
    let cd = dst.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::DegenerateGeometry("SVD failed".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::DegenerateGeometry("SVD failed".into()))?;
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    let r = orthonormalize(&r);
    Placement::new(r, cd - r * cs)
}

/// Re-projects a nearly orthonormal matrix onto SO(3) so rounding never
/// trips the placement tolerance.
fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => {
            let d = (u * v_t).determinant().signum();
            u * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * v_t
        }
        _ => *r,
    }
}

/// Centroid and a right-handed principal frame (columns sorted by
/// decreasing variance).
fn principal_frame(cloud: &PointCloud, what: &str) -> Result<(Vec3, Matrix3<f64>)> {
    if cloud.len() < 4 {
        return Err(Error::DegenerateGeometry(format!(
            "{what} cloud has {} points, at least 4 are needed",
            cloud.len()
        )));
    }
    let c = cloud.centroid();
    let mut cov = Matrix3::zeros();
    for p in cloud.iter() {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= cloud.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (hi, lo) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[2]]);
    if !(hi > 0.0) || lo <= PLANARITY_RATIO * hi {
        return Err(Error::DegenerateGeometry(format!("{what} cloud is coplanar")));
    }
    let e0: Vec3 = eig.eigenvectors.column(order[0]).into();
    let e1: Vec3 = eig.eigenvectors.column(order[1]).into();
    // Fix each axis sign by the third moment so the frame is intrinsic.
    let fix = |e: Vec3| {
        let skew: f64 = cloud.iter().map(|p| (p - c).dot(&e).powi(3)).sum();
        if skew < 0.0 {
            -e
        } else {
            e
        }
    };
    let (e0, e1) = (fix(e0), fix(e1));
    let e2 = e0.cross(&e1);
    Ok((c, Matrix3::from_columns(&[e0, e1, e2])))
}

/// Per-CAD-point nearest scan match.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    /// `(cad index, scan index)`, one per CAD point in CAD order.
    pub pairs: Vec<(usize, usize)>,
    /// `scan[pair.1] − cad[pair.0]`.
    pub displacements: Vec<Vec3>,
    /// Set when the scan has fewer points than the CAD cloud, so the matching
    /// cannot be one-to-one.
    pub sparse_scan: bool,
}

impl Correspondence {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("cad_index,scan_index,dx,dy,dz\n");
        for (&(i, j), d) in self.pairs.iter().zip(&self.displacements) {
            let _ = writeln!(s, "{i},{j},{},{},{}", fmt_f64(d.x), fmt_f64(d.y), fmt_f64(d.z));
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn correspond(cad: &PointCloud, scan: &PointCloud) -> Result<Correspondence> {
    let index = SpatialIndex::new(scan);
    let mut pairs = Vec::with_capacity(cad.len());
    let mut displacements = Vec::with_capacity(cad.len());
    for (i, c) in cad.iter().enumerate() {
        let (j, _) = index.nearest_squared(c)?;
        pairs.push((i, j));
        displacements.push(scan.points()[j] - c);
    }
    Ok(Correspondence {
        pairs,
        displacements,
        sparse_scan: scan.len() < cad.len(),
    })
}

/// Aligns a scan to the CAD frame with default ICP settings.
pub fn align_scan(scan: &PointCloud, cad: &PointCloud) -> Result<(PointCloud, RigidFit)> {
    let fit = icp_align(scan, cad, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
    Ok((apply_placement(scan, &fit.placement)?, fit))
}
