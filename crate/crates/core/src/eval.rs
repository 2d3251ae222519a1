//! Deviation metrics and heatmap export.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};
use crate::io::PlyData;
use crate::registration::correspond;
use crate::remesh::IsoGraph;

/// Summary of a signed deviation field, in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationReport {
    pub min: f64,
    pub max: f64,
    /// Population standard deviation of the signed values.
    pub std: f64,
    pub abs_mean: f64,
    /// Percent reduction of `abs_mean` against a baseline, when one was given.
    pub improvement: Option<f64>,
}

impl DeviationReport {
    pub fn from_field(field: &SignedDeviationField) -> Result<Self> {
        let v = field.values();
        if v.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Ok(Self {
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            std: var.sqrt(),
            abs_mean: v.iter().map(|x| x.abs()).sum::<f64>() / n,
            improvement: None,
        })
    }

    pub fn with_baseline(mut self, baseline: &DeviationReport) -> Result<Self> {
        self.improvement = Some(improvement(baseline.abs_mean, self.abs_mean)?);
        Ok(self)
    }
}

/// `(baseline − after) / baseline × 100`.
pub fn improvement(baseline_abs_mean: f64, abs_mean: f64) -> Result<f64> {
    if !(baseline_abs_mean.is_finite() && baseline_abs_mean > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "baseline abs mean must be positive, got {baseline_abs_mean}"
        )));
    }
    if !(abs_mean.is_finite() && abs_mean >= 0.0) {
        return Err(Error::InvalidArgument(format!("abs mean must be >= 0, got {abs_mean}")));
    }
    Ok((baseline_abs_mean - abs_mean) / baseline_abs_mean * 100.0)
}

/// Per-vertex deviation: displacement length, signed by the outward normal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDeviationField {
    values: Vec<f64>,
}

impl SignedDeviationField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("deviation values must be finite".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest absolute deviation, the half-width of a symmetric color range.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Area-weighted vertex normals. Each face normal is flipped to point away
/// from the centroid of `points`; vertices without faces use the direction
/// from the centroid.
pub fn vertex_normals(graph: &IsoGraph, points: &[Vec3]) -> Result<Vec<Vec3>> {
    if points.len() != graph.len() {
        return Err(Error::Alignment {
            expected: graph.len(),
            found: points.len(),
        });
    }
    let centroid = points.iter().sum::<Vec3>() / points.len().max(1) as f64;
    let mut acc = vec![Vec3::zeros(); points.len()];
    for f in graph.faces() {
        let [a, b, c] = f.map(|i| points[i]);
        // Cross product length is twice the area, which is the weight.
        let mut n = (b - a).cross(&(c - a));
        if n.dot(&((a + b + c) / 3.0 - centroid)) < 0.0 {
            n = -n;
        }
        for &i in f {
            acc[i] += n;
        }
    }
    Ok(acc
        .into_iter()
        .zip(points)
        .map(|(n, p)| {
            let n = if n.norm() > 0.0 { n } else { p - centroid };
            if n.norm() > 0.0 {
                n.normalize()
            } else {
                Vec3::zeros()
            }
        })
        .collect())
}

/// Signed field from index-aligned displacements at the CAD vertices.
pub fn signed_field(graph: &IsoGraph, cad: &PointCloud, displacements: &[Vec3]) -> Result<SignedDeviationField> {
    let normals = vertex_normals(graph, cad.points())?;
    if displacements.len() != normals.len() {
        return Err(Error::Alignment {
            expected: normals.len(),
            found: displacements.len(),
        });
    }
    SignedDeviationField::new(
        displacements
            .iter()
            .zip(&normals)
            .map(|(d, n)| if d.dot(n) < 0.0 { -d.norm() } else { d.norm() })
            .collect(),
    )
}

/// Matches every CAD vertex to its nearest scan point and summarizes the
/// signed deviations.
pub fn deviation_report(cad: &PointCloud, scan: &PointCloud, graph: &IsoGraph) -> Result<(DeviationReport, SignedDeviationField)> {
    let corr = correspond(cad, scan)?;
    let field = signed_field(graph, cad, &corr.displacements)?;
    Ok((DeviationReport::from_field(&field)?, field))
}

const RANGE_PREFIX: &str = "deviation range";

/// ASCII PLY with a `deviation` vertex property and the symmetric color
/// range `(-c, c)`, `c = max |deviation|`, in a header comment.
pub fn export_heatmap(field: &SignedDeviationField, cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    heatmap_ply(field, cloud)?.write(path)
}

pub fn heatmap_ply(field: &SignedDeviationField, cloud: &PointCloud) -> Result<PlyData> {
    if field.len() != cloud.len() {
        return Err(Error::Alignment {
            expected: cloud.len(),
            found: field.len(),
        });
    }
    let c = field.max_abs();
    let mut ply = PlyData::from_cloud(cloud).with_property("deviation", field.values().to_vec());
    ply.comments.push(format!("{RANGE_PREFIX} ({}, {}) mm", -c, c));
    Ok(ply)
}

/// Reads a heatmap back as `(cloud, field, range half-width)`.
pub fn read_heatmap(path: impl AsRef<Path>) -> Result<(PointCloud, SignedDeviationField, f64)> {
    let path = path.as_ref();
    let ply = PlyData::read(path)?;
    let values = ply
        .property("deviation")
        .ok_or_else(|| Error::parse(path, "no deviation property"))?
        .to_vec();
    let range = ply
        .comments
        .iter()
        .find_map(|c| c.strip_prefix(RANGE_PREFIX))
        .and_then(|r| r.trim().strip_prefix('(')?.split_once(',')?.1.trim().split(')').next()?.parse::<f64>().ok())
        .ok_or_else(|| Error::parse(path, "no deviation range comment"))?;
    Ok((ply.cloud()?, SignedDeviationField::new(values)?, range))
}

pub const REPORT_HEADER: &str = "part,min,max,std,abs_mean,improvement";

/// CSV with one row per labeled report, 4 decimal places; the improvement
/// cell is empty without a baseline.
pub fn report_csv(rows: &[(String, DeviationReport)]) -> String {
    let mut s = format!("{REPORT_HEADER}\n");
    for (label, r) in rows {
        let imp = r.improvement.map(|v| format!("{v:.4}")).unwrap_or_default();
        let _ = writeln!(s, "{label},{:.4},{:.4},{:.4},{:.4},{imp}", r.min, r.max, r.std, r.abs_mean);
    }
    s
}

pub fn write_report_csv(rows: &[(String, DeviationReport)], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, report_csv(rows))?;
    Ok(())
}
