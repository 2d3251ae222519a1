use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::voxel::{SurfaceSet, NEIGHBORS_26};
use super::IsoGraph;
use crate::error::{Error, Result};

/// Acceptance probability of a non-face neighbor per visit.
pub const DIAGONAL_ACCEPTANCE: f64 = 0.176_776_695_296_636_87; // 1 / (4·√2)

const AXIS_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

fn offset(c: [usize; 3], d: [i64; 3]) -> Option<[usize; 3]> {
    let mut out = [0usize; 3];
    for a in 0..3 {
        out[a] = usize::try_from(c[a] as i64 + d[a]).ok()?;
    }
    Some(out)
}

fn unit(axis: usize) -> [i64; 3] {
    let mut d = [0; 3];
    d[axis] = 1;
    d
}

/// Wraps a surface voxel shell into a graph with one vertex per voxel.
///
/// Expansion starts at a seeded random voxel. Face neighbors are admitted
/// unconditionally; other neighbors are admitted with probability
/// [`DIAGONAL_ACCEPTANCE`] per visit and retried on later passes until
/// reached. Accepted diagonal steps become edges and steer the choice of
/// diagonal when axis-plane squares are split into triangles.
pub fn diffusion_wrap(surface: &SurfaceSet, seed: u64) -> Result<IsoGraph> {
    let cells = surface.cells();
    let n = cells.len();
    if n == 0 {
        return Err(Error::InvalidArgument("surface set is empty".into()));
    }
    let lookup: HashMap<[usize; 3], usize> = cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let at = |c: [usize; 3], d: [i64; 3]| offset(c, d).and_then(|o| lookup.get(&o).copied());

    let components = count_components(n, |u| {
        NEIGHBORS_26.iter().filter_map(move |&d| at(cells[u], d)).collect::<Vec<_>>()
    });
    if components > 1 {
        return Err(Error::DisconnectedSurface { components });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.gen_range(0..n);
    let mut admitted = vec![false; n];
    admitted[start] = true;
    let mut count = 1;
    let mut accepted = BTreeSet::new();
    let mut frontier = vec![start];
    while count < n {
        let mut next = Vec::new();
        for &u in &frontier {
            let mut pending = false;
            for d in NEIGHBORS_26 {
                let Some(w) = at(cells[u], d) else { continue };
                if admitted[w] {
                    continue;
                }
                let face = d.iter().map(|v| v.abs()).sum::<i64>() == 1;
                if face || rng.gen_bool(DIAGONAL_ACCEPTANCE) {
                    admitted[w] = true;
                    count += 1;
                    next.push(w);
                    if !face {
                        accepted.insert([u.min(w), u.max(w)]);
                    }
                } else {
                    pending = true;
                }
            }
            if pending {
                next.push(u);
            }
        }
        frontier = next;
    }

    let mut face_edges = BTreeSet::new();
    let mut faces = Vec::new();
    for (a, &c) in cells.iter().enumerate() {
        for (p, q) in AXIS_PAIRS {
            let (Some(b), Some(cq), Some(d)) = (
                at(c, unit(p)),
                at(c, unit(q)),
                at(c, [unit(p)[0] + unit(q)[0], unit(p)[1] + unit(q)[1], unit(p)[2] + unit(q)[2]]),
            ) else {
                continue;
            };
            // Both diagonals have equal length; prefer one the wrap walked.
            let anti = [b.min(cq), b.max(cq)];
            let split_anti = accepted.contains(&anti) && !accepted.contains(&[a, d]);
            let tris = if split_anti {
                [[a, b, cq], [b, d, cq]]
            } else {
                [[a, b, d], [a, d, cq]]
            };
            for t in tris {
                for (x, y) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                    face_edges.insert([x.min(y), x.max(y)]);
                }
                faces.push(canonical_face(t));
            }
        }
    }

    // Edges outside every face survive only where they hold the graph together.
    let mut candidates: Vec<(bool, [usize; 2])> = Vec::new();
    for (i, &c) in cells.iter().enumerate() {
        for axis in 0..3 {
            if let Some(j) = at(c, unit(axis)) {
                if !face_edges.contains(&[i, j]) {
                    candidates.push((false, [i, j]));
                }
            }
        }
    }
    for &e in &accepted {
        if !face_edges.contains(&e) {
            candidates.push((true, e));
        }
    }
    candidates.sort_unstable();
    let mut dsu = Dsu::new(n);
    for &[x, y] in &face_edges {
        dsu.union(x, y);
    }
    let mut edges: Vec<[usize; 2]> = face_edges.into_iter().collect();
    for (_, [x, y]) in candidates {
        if dsu.union(x, y) {
            edges.push([x, y]);
        }
    }

    faces.sort_unstable();
    let vertices = cells.iter().map(|&c| surface.center(c)).collect();
    IsoGraph::new(vertices, edges, faces)
}

/// Rotates a triangle so its smallest index comes first, keeping orientation.
fn canonical_face(t: [usize; 3]) -> [usize; 3] {
    let k = (0..3).min_by_key(|&i| t[i]).unwrap_or(0);
    [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
}

fn count_components(n: usize, neighbors: impl Fn(usize) -> Vec<usize>) -> usize {
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for w in neighbors(u) {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    count
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins the sets of `a` and `b`; false if they were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}
