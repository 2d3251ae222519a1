//! Shared 3D data types: point clouds, triangle meshes, rigid placements and
//! the build chamber frame.
//!
//! The chamber frame is right-handed with z pointing along the build direction
//! and the origin at the chamber's minimum corner. All lengths are millimetres.

mod kdtree;
mod resample;

pub use kdtree::{nearest_neighbor, SpatialIndex};
pub use resample::{resample_uniform, DEFAULT_SAMPLE_COUNT};

use nalgebra::{Matrix3, Rotation3, Unit};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Tolerance on `RᵀR = I` and `det R = 1` for a valid placement.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Ordered set of points. Index `i` identifies the same surface point across
/// every stage of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(Self { points })
    }

    pub fn from_rows(rows: &[[f64; 3]]) -> Result<Self> {
        Self::new(rows.iter().map(|r| Vec3::new(r[0], r[1], r[2])).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false: a cloud holds at least one point.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec3> {
        self.points.iter()
    }

    pub fn centroid(&self) -> Vec3 {
        self.points.iter().sum::<Vec3>() / self.points.len() as f64
    }

    /// Row-major `n × 3` copy of the coordinates.
    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if !values.len().is_multiple_of(3) {
            return Err(Error::Shape(format!(
                "flat coordinate buffer of length {} is not a multiple of 3",
                values.len()
            )));
        }
        Self::new(
            values
                .chunks_exact(3)
                .map(|c| Vec3::new(c[0], c[1], c[2]))
                .collect(),
        )
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        bounds_of(&self.points)
    }
}

pub(crate) fn bounds_of(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Indexed triangle mesh, the raw CAD representation.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::Index(format!(
                    "face {fi} references a vertex beyond {}",
                    vertices.len()
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateMesh(format!(
                    "face {fi} repeats a vertex index"
                )));
            }
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument(
                "mesh has a non-finite vertex".into(),
            ));
        }
        Ok(Self { vertices, faces })
    }

    /// Axis-aligned box centered at the origin, outward-facing triangles.
    pub fn cuboid(size: Vec3) -> Self {
        let h = size / 2.0;
        let vertices = (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 == 0 { -h.x } else { h.x },
                    if i & 2 == 0 { -h.y } else { h.y },
                    if i & 4 == 0 { -h.z } else { h.z },
                )
            })
            .collect();
        let faces = vec![
            [0, 2, 1],
            [1, 2, 3],
            [4, 5, 6],
            [5, 7, 6],
            [0, 1, 4],
            [1, 5, 4],
            [2, 6, 3],
            [3, 6, 7],
            [0, 4, 2],
            [2, 4, 6],
            [1, 3, 5],
            [3, 7, 5],
        ];
        Self { vertices, faces }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        bounds_of(&self.vertices)
    }

    pub fn transformed(&self, placement: &Placement) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| placement.apply(v)).collect(),
            faces: self.faces.clone(),
        }
    }
}

/// Rigid pose of a part in the build chamber: `p ↦ R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl Placement {
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let placement = Self {
            rotation,
            translation,
        };
        placement.validate()?;
        Ok(placement)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn translation(t: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation of `angle` radians about `axis`, followed by `translation`.
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Result<Self> {
        if axis.norm() == 0.0 {
            return Err(Error::InvalidPlacement("zero rotation axis".into()));
        }
        let rotation = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        Self::new(*rotation.matrix(), translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation_vector(&self) -> &Vec3 {
        &self.translation
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rotation;
        if !r.iter().chain(self.translation.iter()).all(|c| c.is_finite()) {
            return Err(Error::InvalidPlacement("non-finite entry".into()));
        }
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        if ortho > ROTATION_TOLERANCE {
            return Err(Error::InvalidPlacement(format!(
                "rotation is not orthonormal (max |RᵀR − I| = {ortho:e})"
            )));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidPlacement(format!(
                "rotation determinant is {det}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Placement) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Rotation angle in radians.
    pub fn angle(&self) -> f64 {
        ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

pub fn apply_placement(cloud: &PointCloud, placement: &Placement) -> Result<PointCloud> {
    placement.validate()?;
    Ok(PointCloud {
        points: cloud.points.iter().map(|p| placement.apply(p)).collect(),
    })
}

/// Axis-aligned build volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChamberSpec {
    min: Vec3,
    max: Vec3,
}

impl ChamberSpec {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if (0..3).any(|a| !(min[a] < max[a])) {
            return Err(Error::InvalidArgument(format!(
                "chamber min {min:?} must be below max {max:?} on every axis"
            )));
        }
        Ok(Self { min, max })
    }

    /// A chamber of the given size with its minimum corner at the origin.
    pub fn with_size(size: Vec3) -> Result<Self> {
        Self::new(Vec3::zeros(), size)
    }

    pub fn min(&self) -> Vec3 {
        self.min
    }

    pub fn max(&self) -> Vec3 {
        self.max
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) / 2.0
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn half_extents(&self) -> Vec3 {
        self.extents() / 2.0
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

impl Default for ChamberSpec {
    /// 380 × 284 × 380 mm, a common powder-bed build volume.
    fn default() -> Self {
        Self {
            min: Vec3::zeros(),
            max: Vec3::new(380.0, 284.0, 380.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn identity_placement_leaves_cloud_unchanged() {
        let cloud = PointCloud::from_rows(&[[1.0, 2.0, 3.0], [-4.0, 0.5, 9.0]]).unwrap();
        let out = apply_placement(&cloud, &Placement::identity()).unwrap();
        assert_eq!(out, cloud);
    }

    #[test]
    fn quarter_turn_about_z() {
        let cloud = PointCloud::from_rows(&[[1.0, 0.0, 0.0]]).unwrap();
        let p = Placement::from_axis_angle(Vec3::z(), FRAC_PI_2, Vec3::zeros()).unwrap();
        let out = apply_placement(&cloud, &p).unwrap();
        assert_relative_eq!(out.points()[0], Vec3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn non_orthonormal_rotation_is_rejected() {
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            Placement::new(skew, Vec3::zeros()),
            Err(Error::InvalidPlacement(_))
        ));
        let reflection = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            Placement::new(reflection, Vec3::zeros()),
            Err(Error::InvalidPlacement(_))
        ));
    }

    #[test]
    fn empty_or_non_finite_clouds_are_rejected() {
        assert!(matches!(PointCloud::new(vec![]), Err(Error::EmptyCloud)));
        assert!(PointCloud::from_rows(&[[0.0, f64::NAN, 0.0]]).is_err());
    }

    #[test]
    fn mesh_validation() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 2]]).is_ok());
        assert!(matches!(
            TriangleMesh::new(v.clone(), vec![[0, 1, 3]]),
            Err(Error::Index(_))
        ));
        assert!(matches!(
            TriangleMesh::new(v, vec![[0, 1, 1]]),
            Err(Error::DegenerateMesh(_))
        ));
    }

    #[test]
    fn cuboid_faces_point_outward() {
        let mesh = TriangleMesh::cuboid(Vec3::new(2.0, 3.0, 4.0));
        assert_relative_eq!(mesh.area(), 2.0 * (6.0 + 8.0 + 12.0), epsilon = 1e-12);
        for f in 0..mesh.faces().len() {
            let [a, b, c] = mesh.triangle(f);
            let n = (b - a).cross(&(c - a));
            let centroid = (a + b + c) / 3.0;
            assert!(n.dot(&centroid) > 0.0, "face {f} points inward");
        }
    }

    #[test]
    fn chamber_center_is_midpoint() {
        let c = ChamberSpec::new(Vec3::new(-1.0, 0.0, 2.0), Vec3::new(3.0, 4.0, 6.0)).unwrap();
        assert_eq!(c.center(), Vec3::new(1.0, 2.0, 4.0));
        assert!(ChamberSpec::new(Vec3::zeros(), Vec3::new(1.0, 0.0, 1.0)).is_err());
    }

    fn arb_placement() -> impl Strategy<Value = Placement> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            -3.2f64..3.2,
            prop::array::uniform3(-200.0f64..200.0),
        )
            .prop_filter("axis must be nonzero", |(a, _, _)| {
                Vec3::from(*a).norm() > 1e-3
            })
            .prop_map(|(a, angle, t)| {
                Placement::from_axis_angle(Vec3::from(a), angle, Vec3::from(t)).unwrap()
            })
    }

    proptest! {
        #[test]
        fn placement_then_inverse_restores_cloud(
            placement in arb_placement(),
            rows in prop::collection::vec(prop::array::uniform3(-100.0f64..100.0), 1..40),
        ) {
            let cloud = PointCloud::from_rows(&rows).unwrap();
            let there = apply_placement(&cloud, &placement).unwrap();
            let back = apply_placement(&there, &placement.inverse()).unwrap();
            for (a, b) in back.iter().zip(cloud.iter()) {
                prop_assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
            }
        }

        #[test]
        fn placement_preserves_pairwise_distances(
            placement in arb_placement(),
            rows in prop::collection::vec(prop::array::uniform3(-100.0f64..100.0), 2..30),
        ) {
            let cloud = PointCloud::from_rows(&rows).unwrap();
            let moved = apply_placement(&cloud, &placement).unwrap();
            let (p, q) = (cloud.points(), moved.points());
            for i in 0..p.len() {
                for j in 0..i {
                    let before = (p[i] - p[j]).norm();
                    let after = (q[i] - q[j]).norm();
                    prop_assert!((before - after).abs() <= 1e-9 * before.max(1.0));
                }
            }
        }
    }
}
