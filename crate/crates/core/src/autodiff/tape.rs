use std::sync::Arc;

use nalgebra::Matrix3;
use ndarray::linalg::general_mat_mul;

use super::tensor::{view, view_mut, Tensor};
use super::ParamSet;
use crate::error::{Error, Result};
use crate::geometry::{SpatialIndex, Vec3};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Neighbor lists in compressed-row form, validated for use by the
/// gather-mean primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl Adjacency {
    pub fn new(lists: &[Vec<usize>]) -> Result<Self> {
        let n = lists.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for (i, list) in lists.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::IsolatedVertex(i));
            }
            if let Some(&j) = list.iter().find(|&&j| j >= n) {
                return Err(Error::Index(format!(
                    "vertex {i} lists neighbor {j} but there are only {n} vertices"
                )));
            }
            indices.extend_from_slice(list);
            offsets.push(indices.len());
        }
        Ok(Self { offsets, indices })
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Affine {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    GatherMean {
        x: Var,
        adj: Arc<Adjacency>,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Relu {
        x: Var,
    },
    ScaleShift {
        x: Var,
        scale: Vec<f64>,
    },
    CenterRows {
        x: Var,
    },
    Sum {
        x: Var,
    },
    L2 {
        a: Var,
        b: Var,
    },
    Chamfer {
        a: Var,
        b: Var,
        a_to_b: Vec<usize>,
        b_to_a: Vec<usize>,
    },
    WeightedSum {
        terms: Vec<(Var, f64)>,
    },
    PointMap {
        x: Var,
        jacobians: Vec<Matrix3<f64>>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Parameter tensors of one [`ParamSet`] as recorded on a tape.
///
/// A frozen set is recorded as constants, so no gradient can reach it.
#[derive(Debug, Clone)]
pub struct ParamVars {
    vars: Vec<Var>,
    frozen: bool,
}

impl ParamVars {
    pub fn get(&self, i: usize) -> Var {
        self.vars[i]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }
}

/// Execution record for reverse-mode differentiation.
///
/// Nodes are appended in execution order, which is a topological order, so
/// backward simply walks the list in reverse.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Smallest `|z|` over the inputs of every recorded ReLU, or `None`
    /// without ReLUs. Finite differences with a step below this margin never
    /// straddle a kink of a first-order input.
    pub fn relu_margin(&self) -> Option<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu { x } => Some(self.value(x).data().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))),
                _ => None,
            })
            .reduce(f64::min)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Leaf that receives a gradient.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn params(&mut self, set: &ParamSet) -> ParamVars {
        let frozen = set.is_frozen();
        let vars = set
            .tensors()
            .iter()
            .map(|t| self.push(t.clone(), Op::Leaf, !frozen))
            .collect();
        ParamVars { vars, frozen }
    }

    /// `x · w + b` with `x: n×in`, `w: in×out`, `b: out`.
    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (n, k) = self.value(x).require_matrix("affine input")?;
        let (k2, m) = self.value(w).require_matrix("affine weight")?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "affine input has {k} columns but weight has {k2} rows"
            )));
        }
        let mut out = vec![0.0; n * m];
        if let Some(b) = b {
            let bv = self.value(b);
            if bv.shape() != [m] {
                return Err(Error::Shape(format!(
                    "affine bias has shape {:?}, expected [{m}]",
                    bv.shape()
                )));
            }
            for row in out.chunks_exact_mut(m) {
                row.copy_from_slice(bv.data());
            }
        }
        {
            let xv = self.value(x).view2();
            let wv = self.value(w).view2();
            let mut ov = view_mut(&mut out, n, m);
            general_mat_mul(1.0, &xv, &wv, 1.0, &mut ov);
        }
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::Affine { x, w, b }, rg))
    }

    /// Row `i` of the output is the mean of the rows of `x` listed as
    /// neighbors of `i`.
    pub fn gather_mean(&mut self, x: Var, adj: &Arc<Adjacency>) -> Result<Var> {
        let (n, c) = self.value(x).require_matrix("gather-mean input")?;
        if adj.len() != n {
            return Err(Error::Shape(format!(
                "adjacency covers {} vertices but features have {n} rows",
                adj.len()
            )));
        }
        let xd = self.value(x).data();
        let mut out = vec![0.0; n * c];
        for (i, row) in out.chunks_exact_mut(c).enumerate() {
            let nb = adj.neighbors(i);
            for &j in nb {
                for (o, v) in row.iter_mut().zip(&xd[j * c..(j + 1) * c]) {
                    *o += v;
                }
            }
            let inv = 1.0 / nb.len() as f64;
            row.iter_mut().for_each(|o| *o *= inv);
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::matrix(n, c, out)?,
            Op::GatherMean {
                x,
                adj: Arc::clone(adj),
            },
            rg,
        ))
    }

    /// Column-wise concatenation `[a | b]`.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, ca) = self.value(a).require_matrix("concat operand")?;
        let (n2, cb) = self.value(b).require_matrix("concat operand")?;
        if n != n2 {
            return Err(Error::Shape(format!(
                "concat operands have {n} and {n2} rows"
            )));
        }
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(n * (ca + cb));
        for i in 0..n {
            out.extend_from_slice(&ad[i * ca..(i + 1) * ca]);
            out.extend_from_slice(&bd[i * cb..(i + 1) * cb]);
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::matrix(n, ca + cb, out)?, Op::Concat { a, b }, rg))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::Shape(format!(
                "{what} operands have shapes {sa:?} and {sb:?}"
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add { a, b }, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Sub { a, b }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor {
            shape: v.shape().to_vec(),
            data: v.data().iter().map(|&z| if z > 0.0 { z } else { 0.0 }).collect(),
        };
        let rg = self.rg(x);
        self.push(out, Op::Relu { x }, rg)
    }

    /// `y[i][c] = x[i][c] · scale[c] + shift[c]` with constant scale and shift.
    pub fn scale_shift(&mut self, x: Var, scale: &[f64], shift: &[f64]) -> Result<Var> {
        let (n, c) = self.value(x).require_matrix("scale-shift input")?;
        if scale.len() != c || shift.len() != c {
            return Err(Error::Shape(format!(
                "scale-shift needs {c} coefficients, got {} and {}",
                scale.len(),
                shift.len()
            )));
        }
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_exact_mut(c) {
            for ((v, s), t) in row.iter_mut().zip(scale).zip(shift) {
                *v = *v * s + t;
            }
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::matrix(n, c, out)?,
            Op::ScaleShift {
                x,
                scale: scale.to_vec(),
            },
            rg,
        ))
    }

    /// Subtracts the column means, leaving rows centered on the origin.
    pub fn center_rows(&mut self, x: Var) -> Result<Var> {
        let (n, c) = self.value(x).require_matrix("center input")?;
        let mut out = self.value(x).data().to_vec();
        let means = column_means(&out, n, c);
        for row in out.chunks_exact_mut(c) {
            row.iter_mut().zip(&means).for_each(|(v, m)| *v -= m);
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::matrix(n, c, out)?, Op::CenterRows { x }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg)
    }

    /// Mean over rows of the squared row difference norm.
    pub fn l2_loss(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "l2 loss")?;
        let (n, c) = self.value(a).require_matrix("l2 loss operand")?;
        if n == 0 {
            return Err(Error::EmptyCloud);
        }
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut total = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for k in i * c..(i + 1) * c {
                let d = ad[k] - bd[k];
                row += d * d;
            }
            total += row;
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::scalar(total / n as f64), Op::L2 { a, b }, rg))
    }

    /// Sum over each point of the distance to its nearest point in the other
    /// set, in both directions. Rows are 3D points.
    pub fn chamfer(&mut self, a: Var, b: Var) -> Result<Var> {
        let pa = rows_as_points(self.value(a), "chamfer operand")?;
        let pb = rows_as_points(self.value(b), "chamfer operand")?;
        let (value, a_to_b, b_to_a) = chamfer_parts(&pa, &pb)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(
            Tensor::scalar(value),
            Op::Chamfer {
                a,
                b,
                a_to_b,
                b_to_a,
            },
            rg,
        ))
    }

    /// `Σ wᵢ·sᵢ` over scalar nodes, accumulated in the given order.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        let mut total = 0.0;
        for &(v, w) in terms {
            total += w * self.value(v).item()?;
        }
        let rg = terms.iter().any(|&(v, _)| self.rg(v));
        Ok(self.push(
            Tensor::scalar(total),
            Op::WeightedSum {
                terms: terms.to_vec(),
            },
            rg,
        ))
    }

    /// Applies a pointwise map to every row of an `n×3` matrix. `f` returns
    /// the image and its Jacobian at the point.
    pub fn map_points<F>(&mut self, x: Var, mut f: F) -> Result<Var>
    where
        F: FnMut(&Vec3) -> Result<(Vec3, Matrix3<f64>)>,
    {
        let pts = rows_as_points(self.value(x), "point map input")?;
        let mut out = Vec::with_capacity(pts.len() * 3);
        let mut jacobians = Vec::with_capacity(pts.len());
        for p in &pts {
            let (q, j) = f(p)?;
            out.extend_from_slice(&[q.x, q.y, q.z]);
            jacobians.push(j);
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::matrix(pts.len(), 3, out)?,
            Op::PointMap { x, jacobians },
            rg,
        ))
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, node has shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut [f64]> {
        if !self.rg(v) {
            return None;
        }
        let len = self.value(v).len();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; len]).as_mut_slice())
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                let (n, k) = (self.value(*x).rows(), self.value(*x).cols());
                let m = self.value(*w).cols();
                let gv = view(g, n, m);
                if let Some(dx) = self.acc(grads, *x) {
                    let wv = self.value(*w).view2();
                    general_mat_mul(1.0, &gv, &wv.t(), 1.0, &mut view_mut(dx, n, k));
                }
                if let Some(dw) = self.acc(grads, *w) {
                    let xv = self.value(*x).view2();
                    general_mat_mul(1.0, &xv.t(), &gv, 1.0, &mut view_mut(dw, k, m));
                }
                if let Some(b) = b {
                    if let Some(db) = self.acc(grads, *b) {
                        for row in g.chunks_exact(m) {
                            db.iter_mut().zip(row).for_each(|(d, r)| *d += r);
                        }
                    }
                }
            }
            Op::GatherMean { x, adj } => {
                let c = self.value(*x).cols();
                if let Some(dx) = self.acc(grads, *x) {
                    for i in 0..adj.len() {
                        let nb = adj.neighbors(i);
                        let inv = 1.0 / nb.len() as f64;
                        let gi = &g[i * c..(i + 1) * c];
                        for &j in nb {
                            for (d, v) in dx[j * c..(j + 1) * c].iter_mut().zip(gi) {
                                *d += v * inv;
                            }
                        }
                    }
                }
            }
            Op::Concat { a, b } => {
                let ca = self.value(*a).cols();
                let cb = self.value(*b).cols();
                let w = ca + cb;
                if let Some(da) = self.acc(grads, *a) {
                    for (row, d) in g.chunks_exact(w).zip(da.chunks_exact_mut(ca)) {
                        d.iter_mut().zip(&row[..ca]).for_each(|(d, v)| *d += v);
                    }
                }
                if let Some(db) = self.acc(grads, *b) {
                    for (row, d) in g.chunks_exact(w).zip(db.chunks_exact_mut(cb)) {
                        d.iter_mut().zip(&row[ca..]).for_each(|(d, v)| *d += v);
                    }
                }
            }
            Op::Add { a, b } => {
                for v in [*a, *b] {
                    if let Some(d) = self.acc(grads, v) {
                        d.iter_mut().zip(g).for_each(|(d, v)| *d += v);
                    }
                }
            }
            Op::Sub { a, b } => {
                if let Some(d) = self.acc(grads, *a) {
                    d.iter_mut().zip(g).for_each(|(d, v)| *d += v);
                }
                if let Some(d) = self.acc(grads, *b) {
                    d.iter_mut().zip(g).for_each(|(d, v)| *d -= v);
                }
            }
            Op::Relu { x } => {
                let out = node.value.data();
                if let Some(d) = self.acc(grads, *x) {
                    for ((d, v), o) in d.iter_mut().zip(g).zip(out) {
                        if *o > 0.0 {
                            *d += v;
                        }
                    }
                }
            }
            Op::ScaleShift { x, scale } => {
                let c = scale.len();
                if let Some(d) = self.acc(grads, *x) {
                    for (drow, grow) in d.chunks_exact_mut(c).zip(g.chunks_exact(c)) {
                        for ((d, v), s) in drow.iter_mut().zip(grow).zip(scale) {
                            *d += v * s;
                        }
                    }
                }
            }
            Op::CenterRows { x } => {
                let (n, c) = (self.value(*x).rows(), self.value(*x).cols());
                let means = column_means(g, n, c);
                if let Some(d) = self.acc(grads, *x) {
                    for (drow, grow) in d.chunks_exact_mut(c).zip(g.chunks_exact(c)) {
                        for ((d, v), m) in drow.iter_mut().zip(grow).zip(&means) {
                            *d += v - m;
                        }
                    }
                }
            }
            Op::Sum { x } => {
                if let Some(d) = self.acc(grads, *x) {
                    d.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::L2 { a, b } => {
                let n = self.value(*a).rows();
                let scale = 2.0 * g[0] / n as f64;
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                if let Some(d) = self.acc(grads, *a) {
                    for k in 0..d.len() {
                        d[k] += scale * (ad[k] - bd[k]);
                    }
                }
                if let Some(d) = self.acc(grads, *b) {
                    for k in 0..d.len() {
                        d[k] -= scale * (ad[k] - bd[k]);
                    }
                }
            }
            Op::Chamfer {
                a,
                b,
                a_to_b,
                b_to_a,
            } => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                // Unit direction from `q` to `p`; the subgradient at p = q is 0.
                let unit = |p: &[f64], q: &[f64]| -> [f64; 3] {
                    let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
                    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                    if r > 0.0 {
                        [g[0] * d[0] / r, g[0] * d[1] / r, g[0] * d[2] / r]
                    } else {
                        [0.0; 3]
                    }
                };
                let mut terms: Vec<(usize, usize, [f64; 3])> =
                    Vec::with_capacity(a_to_b.len() + b_to_a.len());
                for (i, &j) in a_to_b.iter().enumerate() {
                    terms.push((i, j, unit(&ad[3 * i..3 * i + 3], &bd[3 * j..3 * j + 3])));
                }
                for (j, &i) in b_to_a.iter().enumerate() {
                    terms.push((i, j, unit(&ad[3 * i..3 * i + 3], &bd[3 * j..3 * j + 3])));
                }
                if let Some(da) = self.acc(grads, *a) {
                    for (i, _, u) in &terms {
                        for k in 0..3 {
                            da[3 * i + k] += u[k];
                        }
                    }
                }
                if let Some(db) = self.acc(grads, *b) {
                    for (_, j, u) in &terms {
                        for k in 0..3 {
                            db[3 * j + k] -= u[k];
                        }
                    }
                }
            }
            Op::WeightedSum { terms } => {
                for &(v, w) in terms {
                    if let Some(d) = self.acc(grads, v) {
                        d[0] += w * g[0];
                    }
                }
            }
            Op::PointMap { x, jacobians } => {
                if let Some(d) = self.acc(grads, *x) {
                    for (i, j) in jacobians.iter().enumerate() {
                        let gi = Vec3::new(g[3 * i], g[3 * i + 1], g[3 * i + 2]);
                        let back = j.transpose() * gi;
                        for k in 0..3 {
                            d[3 * i + k] += back[k];
                        }
                    }
                }
            }
        }
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient at a leaf, or `None` if no gradient reached it.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient at a leaf shaped like its value; zeros if none reached it.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Tensor {
        let shape = tape.value(v).shape().to_vec();
        match self.get(v) {
            Some(g) => Tensor::new(shape, g.to_vec()).expect("gradient matches value shape"),
            None => Tensor::zeros(shape),
        }
    }

    /// Gradients aligned with the tensors of the recorded parameter set.
    pub fn for_params(&self, tape: &Tape, params: &ParamVars) -> Vec<Tensor> {
        params.vars.iter().map(|&v| self.wrt(tape, v)).collect()
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor {
        shape: a.shape().to_vec(),
        data: a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    }
}

fn column_means(data: &[f64], n: usize, c: usize) -> Vec<f64> {
    let mut means = vec![0.0; c];
    for row in data.chunks_exact(c) {
        means.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    means
}

pub(crate) fn rows_as_points(t: &Tensor, what: &str) -> Result<Vec<Vec3>> {
    let (n, c) = t.require_matrix(what)?;
    if c != 3 {
        return Err(Error::Shape(format!("{what} must have 3 columns, got {c}")));
    }
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    Ok(t.data()
        .chunks_exact(3)
        .map(|r| Vec3::new(r[0], r[1], r[2]))
        .collect())
}

/// Chamfer value with the argmin of every term, index-accelerated.
/// Terms are summed in point order, `a`-side first.
pub(crate) fn chamfer_parts(a: &[Vec3], b: &[Vec3]) -> Result<(f64, Vec<usize>, Vec<usize>)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let ib = SpatialIndex::from_points(b.to_vec());
    let ia = SpatialIndex::from_points(a.to_vec());
    let mut total = 0.0;
    let mut a_to_b = Vec::with_capacity(a.len());
    for p in a {
        let (j, d2) = ib.nearest_squared(p)?;
        total += d2.sqrt();
        a_to_b.push(j);
    }
    let mut b_to_a = Vec::with_capacity(b.len());
    for q in b {
        let (i, d2) = ia.nearest_squared(q)?;
        total += d2.sqrt();
        b_to_a.push(i);
    }
    Ok((total, a_to_b, b_to_a))
}
