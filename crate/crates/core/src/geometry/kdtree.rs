use super::{PointCloud, Vec3};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 8;

/// Exact nearest-neighbor index over a fixed point set.
///
/// Results match an exhaustive scan bit for bit: distances are computed the
/// same way and ties go to the lowest point index.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Vec3>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf {
        start: u32,
        end: u32,
    },
    Split {
        axis: u8,
        value: f64,
        left: u32,
        right: u32,
    },
}

#[inline]
pub(crate) fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

impl SpatialIndex {
    pub fn new(cloud: &PointCloud) -> Self {
        Self::from_points(cloud.points().to_vec())
    }

    /// Builds over raw points; an empty slice yields an index whose queries
    /// fail with [`Error::EmptyIndex`].
    pub fn from_points(points: Vec<Vec3>) -> Self {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        if !points.is_empty() {
            let n = order.len();
            build(&points, &mut order, 0, n, &mut nodes);
        }
        Self {
            points,
            order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Index of the nearest point and the squared distance to it.
    pub fn nearest_squared(&self, query: &Vec3) -> Result<(usize, f64)> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, query, &mut best);
        Ok(best)
    }

    pub fn nearest(&self, query: &Vec3) -> Result<(usize, f64)> {
        let (i, d2) = self.nearest_squared(query)?;
        Ok((i, d2.sqrt()))
    }

    fn search(&self, node: usize, q: &Vec3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start as usize..end as usize] {
                    let i = i as usize;
                    let d = dist2(&self.points[i], q);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis as usize] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near as usize, q, best);
                // Equality keeps equidistant candidates with lower indices reachable.
                if diff * diff <= best.1 {
                    self.search(far as usize, q, best);
                }
            }
        }
    }
}

fn build(points: &[Vec3], order: &mut [u32], start: usize, end: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return id;
    }
    let slice = &mut order[start..end];
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &i in slice.iter() {
        lo = lo.inf(&points[i as usize]);
        hi = hi.sup(&points[i as usize]);
    }
    let axis = (hi - lo).imax();
    if hi[axis] == lo[axis] {
        // All points coincide.
        nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        return id;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    let value = points[slice[mid] as usize][axis];
    // Left holds coordinates <= value, right holds >= value.
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build(points, order, start, start + mid, nodes);
    let right = build(points, order, start + mid, end, nodes);
    nodes[id as usize] = Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    };
    id
}

/// Nearest point of the index to `query`: `(index, distance in mm)`.
pub fn nearest_neighbor(index: &SpatialIndex, query: &Vec3) -> Result<(usize, f64)> {
    index.nearest(query)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn brute(points: &[Vec3], q: &Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, q);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    #[test]
    fn query_on_a_point_returns_it() {
        let cloud = PointCloud::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let idx = SpatialIndex::new(&cloud);
        assert_eq!(nearest_neighbor(&idx, &Vec3::new(4.0, 5.0, 6.0)).unwrap(), (1, 0.0));
    }

    #[test]
    fn two_point_example() {
        let cloud = PointCloud::from_rows(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]).unwrap();
        let idx = SpatialIndex::new(&cloud);
        let (i, d) = nearest_neighbor(&idx, &Vec3::new(0.9, 0.0, 0.0)).unwrap();
        assert_eq!(i, 0);
        assert!((d - 0.9).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // Many duplicates spread across leaves, plus an equidistant pair.
        let mut pts = vec![Vec3::new(5.0, 0.0, 0.0); 40];
        pts.push(Vec3::new(-1.0, 0.0, 0.0));
        pts.push(Vec3::new(1.0, 0.0, 0.0));
        let idx = SpatialIndex::from_points(pts);
        assert_eq!(idx.nearest(&Vec3::new(5.0, 0.0, 0.0)).unwrap().0, 0);
        assert_eq!(idx.nearest(&Vec3::zeros()).unwrap().0, 40);
    }

    #[test]
    fn empty_index_errors() {
        let idx = SpatialIndex::from_points(vec![]);
        assert!(matches!(idx.nearest(&Vec3::zeros()), Err(Error::EmptyIndex)));
    }

    #[test]
    fn matches_exhaustive_search_on_random_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec3> = (0..500)
            .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let idx = SpatialIndex::from_points(pts.clone());
        for _ in 0..100 {
            let q = Vec3::new(rng.gen(), rng.gen(), rng.gen()) * 1.2;
            let (i, d) = idx.nearest_squared(&q).unwrap();
            assert_eq!((i, d), brute(&pts, &q));
        }
    }

    proptest! {
        #[test]
        fn equals_exhaustive_search(
            rows in prop::collection::vec(prop::array::uniform3(-5i32..5), 1..300),
            queries in prop::collection::vec(prop::array::uniform3(-6.0f64..6.0), 1..30),
        ) {
            // Integer grid coordinates force plenty of exact ties.
            let pts: Vec<Vec3> = rows.iter().map(|r| Vec3::new(r[0] as f64, r[1] as f64, r[2] as f64)).collect();
            let idx = SpatialIndex::from_points(pts.clone());
            for q in queries.iter().map(|q| Vec3::from(*q)).chain(pts.iter().copied()) {
                prop_assert_eq!(idx.nearest_squared(&q).unwrap(), brute(&pts, &q));
            }
        }
    }
}
