use crate::error::{Error, Result};
use crate::geometry::{TriangleMesh, Vec3};

pub const MAX_CELLS: u128 = 512 * 512 * 512;

/// Dense occupancy grid. Cell `(i, j, k)` spans
/// `origin + [i, i+1) · voxel_size` on each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    origin: Vec3,
    voxel_size: f64,
    dims: [usize; 3],
    occupancy: Vec<bool>,
}

impl VoxelGrid {
    pub fn empty(origin: Vec3, voxel_size: f64, dims: [usize; 3]) -> Result<Self> {
        check_voxel_size(voxel_size)?;
        if dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("grid dims {dims:?} must be positive")));
        }
        let cells = dims.iter().map(|&d| d as u128).product::<u128>();
        if cells > MAX_CELLS {
            return Err(Error::ResolutionLimit { cells });
        }
        Ok(Self {
            origin,
            voxel_size,
            dims,
            occupancy: vec![false; cells as usize],
        })
    }

    /// A grid with exactly the listed cells occupied.
    pub fn from_cells(
        origin: Vec3,
        voxel_size: f64,
        dims: [usize; 3],
        cells: &[[usize; 3]],
    ) -> Result<Self> {
        let mut grid = Self::empty(origin, voxel_size, dims)?;
        for &c in cells {
            if (0..3).any(|a| c[a] >= dims[a]) {
                return Err(Error::Index(format!("cell {c:?} outside grid {dims:?}")));
            }
            grid.set(c, true);
        }
        Ok(grid)
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    fn linear(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    pub fn is_occupied(&self, c: [usize; 3]) -> bool {
        (0..3).all(|a| c[a] < self.dims[a]) && self.occupancy[self.linear(c)]
    }

    /// Occupancy at signed coordinates; anything outside the grid is empty.
    pub fn is_occupied_signed(&self, c: [i64; 3]) -> bool {
        if c.iter().any(|&v| v < 0) {
            return false;
        }
        self.is_occupied([c[0] as usize, c[1] as usize, c[2] as usize])
    }

    pub fn set(&mut self, c: [usize; 3], value: bool) {
        let i = self.linear(c);
        self.occupancy[i] = value;
    }

    pub fn center(&self, c: [usize; 3]) -> Vec3 {
        self.origin + Vec3::new(c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5) * self.voxel_size
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    /// Occupied cells in lexicographic `(x, y, z)` order.
    pub fn occupied_cells(&self) -> Vec<[usize; 3]> {
        let [nx, ny, nz] = self.dims;
        let mut out = Vec::new();
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    if self.occupancy[self.linear([x, y, z])] {
                        out.push([x, y, z]);
                    }
                }
            }
        }
        out
    }
}

fn check_voxel_size(v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidArgument(format!("voxel size must be positive, got {v}")));
    }
    Ok(())
}

/// Marks every cell whose closed box meets a triangle.
///
/// The grid starts 1.5 voxels below the bounding-box minimum, so minimum
/// faces sit on cell centers and one empty layer pads every side.
pub fn voxelize(mesh: &TriangleMesh, voxel_size: f64) -> Result<VoxelGrid> {
    check_voxel_size(voxel_size)?;
    if mesh.faces().is_empty() {
        return Err(Error::DegenerateMesh("mesh has no faces".into()));
    }
    let (lo, hi) = mesh.bounds();
    let origin = lo - Vec3::repeat(1.5 * voxel_size);
    let mut dims = [0usize; 3];
    let mut cells: u128 = 1;
    for a in 0..3 {
        let span = ((hi[a] - origin[a]) / voxel_size).floor();
        if !(span.is_finite() && span < 1e12) {
            return Err(Error::ResolutionLimit { cells: u128::MAX });
        }
        dims[a] = span as usize + 2;
        cells = cells.saturating_mul(dims[a] as u128);
    }
    if cells > MAX_CELLS {
        return Err(Error::ResolutionLimit { cells });
    }
    let mut grid = VoxelGrid::empty(origin, voxel_size, dims)?;
    let half = Vec3::repeat(voxel_size / 2.0);
    for f in 0..mesh.faces().len() {
        let tri = mesh.triangle(f);
        let (mut tlo, mut thi) = (tri[0], tri[0]);
        for p in &tri[1..] {
            tlo = tlo.inf(p);
            thi = thi.sup(p);
        }
        // One extra cell each way; the exact test settles boundary contacts.
        let range = |a: usize| {
            let l = ((tlo[a] - origin[a]) / voxel_size).floor() as i64 - 1;
            let h = ((thi[a] - origin[a]) / voxel_size).floor() as i64 + 1;
            (l.max(0) as usize)..=(h.min(dims[a] as i64 - 1) as usize)
        };
        for x in range(0) {
            for y in range(1) {
                for z in range(2) {
                    let c = [x, y, z];
                    if !grid.is_occupied(c) && triangle_box_overlap(&grid.center(c), &half, &tri) {
                        grid.set(c, true);
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// Separating-axis test between a triangle and a closed axis-aligned box.
/// Touching counts as overlap.
pub fn triangle_box_overlap(center: &Vec3, half: &Vec3, tri: &[Vec3; 3]) -> bool {
    let v = [tri[0] - center, tri[1] - center, tri[2] - center];
    let edges = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];
    let separated = |axis: Vec3| {
        let p = [axis.dot(&v[0]), axis.dot(&v[1]), axis.dot(&v[2])];
        let r = half.x * axis.x.abs() + half.y * axis.y.abs() + half.z * axis.z.abs();
        let min = p[0].min(p[1]).min(p[2]);
        let max = p[0].max(p[1]).max(p[2]);
        min > r || max < -r
    };
    for a in 0..3 {
        let min = v[0][a].min(v[1][a]).min(v[2][a]);
        let max = v[0][a].max(v[1][a]).max(v[2][a]);
        if min > half[a] || max < -half[a] {
            return false;
        }
    }
    for e in &edges {
        for unit in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let axis = unit.cross(e);
            if axis != Vec3::zeros() && separated(axis) {
                return false;
            }
        }
    }
    let normal = edges[0].cross(&edges[1]);
    !(normal != Vec3::zeros() && separated(normal))
}

/// Surface voxel coordinates with the grid frame needed to place them.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSet {
    origin: Vec3,
    voxel_size: f64,
    cells: Vec<[usize; 3]>,
}

impl SurfaceSet {
    /// Cells are sorted and deduplicated.
    pub fn new(origin: Vec3, voxel_size: f64, mut cells: Vec<[usize; 3]>) -> Result<Self> {
        check_voxel_size(voxel_size)?;
        cells.sort_unstable();
        cells.dedup();
        Ok(Self {
            origin,
            voxel_size,
            cells,
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    /// Cells in lexicographic `(x, y, z)` order.
    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn center(&self, c: [usize; 3]) -> Vec3 {
        self.origin + Vec3::new(c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5) * self.voxel_size
    }
}

/// Occupied cells with at least one empty cell among their 26 neighbors.
/// Cells beyond the grid count as empty.
pub fn surface_voxels(grid: &VoxelGrid) -> Result<SurfaceSet> {
    let occupied = grid.occupied_cells();
    if occupied.is_empty() {
        return Err(Error::InvalidArgument("grid has no occupied voxel".into()));
    }
    let cells = occupied
        .into_iter()
        .filter(|c| {
            let s = [c[0] as i64, c[1] as i64, c[2] as i64];
            NEIGHBORS_26
                .iter()
                .any(|d| !grid.is_occupied_signed([s[0] + d[0], s[1] + d[1], s[2] + d[2]]))
        })
        .collect();
    SurfaceSet::new(grid.origin, grid.voxel_size, cells)
}

/// The 26 neighbor offsets in lexicographic order.
pub(crate) const NEIGHBORS_26: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut x = -1;
    while x <= 1 {
        let mut y = -1;
        while y <= 1 {
            let mut z = -1;
            while z <= 1 {
                if !(x == 0 && y == 0 && z == 0) {
                    out[n] = [x, y, z];
                    n += 1;
                }
                z += 1;
            }
            y += 1;
        }
        x += 1;
    }
    out
};

#[cfg(test)]
mod tests {
    use super::*;

    fn block(n: usize) -> VoxelGrid {
        let cells: Vec<[usize; 3]> = (0..n)
            .flat_map(|x| (0..n).flat_map(move |y| (0..n).map(move |z| [x + 1, y + 1, z + 1])))
            .collect();
        VoxelGrid::from_cells(Vec3::zeros(), 1.0, [n + 2; 3], &cells).unwrap()
    }

    #[test]
    fn block_shells() {
        assert_eq!(surface_voxels(&block(5)).unwrap().len(), 98);
        assert_eq!(surface_voxels(&block(3)).unwrap().len(), 26);
        assert_eq!(surface_voxels(&block(1)).unwrap().cells(), &[[1, 1, 1]]);
    }

    #[test]
    fn grid_boundary_counts_as_empty() {
        // A full grid without padding: only the outer layer is surface.
        let cells: Vec<[usize; 3]> = (0..27).map(|i| [i % 3, (i / 3) % 3, i / 9]).collect();
        let grid = VoxelGrid::from_cells(Vec3::zeros(), 1.0, [3, 3, 3], &cells).unwrap();
        assert_eq!(surface_voxels(&grid).unwrap().len(), 26);
    }

    #[test]
    fn empty_grid_has_no_surface() {
        let grid = VoxelGrid::empty(Vec3::zeros(), 1.0, [2, 2, 2]).unwrap();
        assert!(surface_voxels(&grid).is_err());
    }

    #[test]
    fn single_triangle_inside_one_voxel() {
        let mesh = TriangleMesh::new(
            vec![Vec3::new(0.1, 0.1, 0.2), Vec3::new(0.3, 0.1, 0.2), Vec3::new(0.1, 0.3, 0.2)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let grid = voxelize(&mesh, 1.0).unwrap();
        assert_eq!(grid.occupied_cells(), vec![[1, 1, 1]]);
    }

    #[test]
    fn resolution_limit() {
        let mesh = TriangleMesh::cuboid(Vec3::new(100.0, 100.0, 100.0));
        assert!(matches!(voxelize(&mesh, 0.1), Err(Error::ResolutionLimit { .. })));
        assert!(matches!(voxelize(&mesh, 0.0), Err(Error::InvalidArgument(_))));
        assert!(voxelize(&mesh, 0.25).is_ok());
    }

    #[test]
    fn sat_touching_counts() {
        let tri = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0), Vec3::new(1.0, 0.0, 1.0)];
        assert!(triangle_box_overlap(&Vec3::new(0.5, 0.5, 0.5), &Vec3::repeat(0.5), &tri));
        assert!(!triangle_box_overlap(&Vec3::new(0.5, 0.5, 0.5), &Vec3::repeat(0.49), &tri));
    }

    #[test]
    fn neighbor_offsets() {
        assert_eq!(NEIGHBORS_26.len(), 26);
        assert_eq!(NEIGHBORS_26[0], [-1, -1, -1]);
        assert!(!NEIGHBORS_26.contains(&[0, 0, 0]));
    }
}
