//! Tape-based reverse-mode differentiation over dense `f64` matrices.
//!
//! Every node holds a 2-D value. Vectors are single rows. Nodes are
//! appended in evaluation order, so the tape is acyclic and each node's
//! inputs precede it by construction. [`Graph::backward`] walks the tape
//! in reverse and accumulates adjoints.

use std::collections::HashMap;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param,
    MatMul(NodeId, NodeId),
    /// `a · bᵀ`
    MatMulT(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    /// `scale · a + shift`; only the scale matters for the adjoint
    Affine(NodeId, f64),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    GatherRows(NodeId, Vec<usize>),
    GatherElems(NodeId, Vec<usize>),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    SoftmaxRows(NodeId),
    LogSoftmaxRows(NodeId),
    LogSumExp(NodeId),
    Sum(NodeId),
    ClampMin(NodeId, f64),
    MaxRows(NodeId),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Array2<f64>,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<(String, NodeId)>,
    param_index: HashMap<String, NodeId>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id.0].value
    }

    /// The single entry of a `[1, 1]` node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        debug_assert_eq!(v.dim(), (1, 1));
        v[[0, 0]]
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.value(id).dim()
    }

    fn push(&mut self, op: Op, value: Array2<f64>) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Result<NodeId> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("graph constant".into()));
        }
        Ok(self.push(Op::Constant, value))
    }

    pub fn row(&mut self, values: &[f64]) -> Result<NodeId> {
        let value = Array2::from_shape_vec((1, values.len()), values.to_vec())
            .map_err(|e| Error::shape("row", e.to_string()))?;
        self.constant(value)
    }

    pub fn scalar_constant(&mut self, v: f64) -> Result<NodeId> {
        self.row(&[v])
    }

    /// Registers a named learnable leaf. Repeated calls with the same name
    /// return the existing node.
    pub fn param(&mut self, name: &str, value: &Array2<f64>) -> Result<NodeId> {
        if let Some(&id) = self.param_index.get(name) {
            return Ok(id);
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {name}")));
        }
        let id = self.push(Op::Param, value.clone());
        self.params.push((name.to_string(), id));
        self.param_index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn params(&self) -> &[(String, NodeId)] {
        &self.params
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.nrows() {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", va.dim(), vb.dim()),
            ));
        }
        let out = va.dot(vb);
        Ok(self.push(Op::MatMul(a, b), out))
    }

    /// `a · bᵀ`, the shape of a linear layer with weights stored `[out, in]`.
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.ncols() {
            return Err(Error::shape(
                "matmul_t",
                format!("{:?} x {:?}ᵀ", va.dim(), vb.dim()),
            ));
        }
        let out = va.dot(&vb.t());
        Ok(self.push(Op::MatMulT(a, b), out))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let out = self.value(a) + self.value(b);
        Ok(self.push(Op::Add(a, b), out))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a) - self.value(b);
        Ok(self.push(Op::Sub(a, b), out))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a) * self.value(b);
        Ok(self.push(Op::Mul(a, b), out))
    }

    /// Adds the single row `b` to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if vb.nrows() != 1 || vb.ncols() != va.ncols() {
            return Err(Error::shape(
                "add_row",
                format!("{:?} + {:?}", va.dim(), vb.dim()),
            ));
        }
        let out = va + vb;
        Ok(self.push(Op::AddRow(a, b), out))
    }

    pub fn affine(&mut self, a: NodeId, scale: f64, shift: f64) -> Result<NodeId> {
        let out = self.value(a).mapv(|v| scale * v + shift);
        Ok(self.push(Op::Affine(a, scale), out))
    }

    /// `1 − a`
    pub fn one_minus(&mut self, a: NodeId) -> Result<NodeId> {
        self.affine(a, -1.0, 1.0)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Empty("concat_cols"));
        }
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = concatenate(Axis(1), &views).map_err(|e| Error::shape("concat_cols", e.to_string()))?;
        Ok(self.push(Op::ConcatCols(parts.to_vec()), out))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::Empty("concat_rows"));
        }
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = concatenate(Axis(0), &views).map_err(|e| Error::shape("concat_rows", e.to_string()))?;
        Ok(self.push(Op::ConcatRows(parts.to_vec()), out))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let va = self.value(a);
        if len == 0 || start + len > va.ncols() {
            return Err(Error::shape(
                "slice_cols",
                format!("[{start}, {}) of {} columns", start + len, va.ncols()),
            ));
        }
        let out = va.slice(s![.., start..start + len]).to_owned();
        Ok(self.push(Op::SliceCols(a, start, len), out))
    }

    pub fn gather_rows(&mut self, a: NodeId, rows: &[usize]) -> Result<NodeId> {
        let va = self.value(a);
        if rows.is_empty() {
            return Err(Error::Empty("gather_rows"));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= va.nrows()) {
            return Err(Error::shape(
                "gather_rows",
                format!("row {bad} of {}", va.nrows()),
            ));
        }
        let out = va.select(Axis(0), rows);
        Ok(self.push(Op::GatherRows(a, rows.to_vec()), out))
    }

    /// Picks entries by flat row-major index into a `[1, k]` row.
    pub fn gather_elems(&mut self, a: NodeId, idx: &[usize]) -> Result<NodeId> {
        let va = self.value(a);
        if idx.is_empty() {
            return Err(Error::Empty("gather_elems"));
        }
        let cols = va.ncols();
        if let Some(&bad) = idx.iter().find(|&&i| i >= va.len()) {
            return Err(Error::shape(
                "gather_elems",
                format!("index {bad} of {}", va.len()),
            ));
        }
        let data = idx.iter().map(|&i| va[[i / cols, i % cols]]).collect();
        let out = Array2::from_shape_vec((1, idx.len()), data).expect("row shape");
        Ok(self.push(Op::GatherElems(a, idx.to_vec()), out))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let out = self.value(a).mapv(f64::tanh);
        Ok(self.push(Op::Tanh(a), out))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let out = self.value(a).mapv(sigmoid);
        Ok(self.push(Op::Sigmoid(a), out))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let out = self.value(a).mapv(|v| v.max(0.0));
        Ok(self.push(Op::Relu(a), out))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        if va.ncols() == 0 {
            return Err(Error::Empty("softmax_rows"));
        }
        let mut out = va.clone();
        for mut row in out.rows_mut() {
            let p = softmax(row.as_slice().expect("standard layout"))?;
            row.assign(&ndarray::ArrayView1::from(&p));
        }
        Ok(self.push(Op::SoftmaxRows(a), out))
    }

    pub fn log_softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        if va.ncols() == 0 {
            return Err(Error::Empty("log_softmax_rows"));
        }
        let mut out = va.clone();
        for mut row in out.rows_mut() {
            let lse = log_sum_exp(row.as_slice().expect("standard layout"))?;
            row.mapv_inplace(|v| v - lse);
        }
        Ok(self.push(Op::LogSoftmaxRows(a), out))
    }

    /// `log Σ exp(a)` over every entry, as a `[1, 1]` node.
    pub fn log_sum_exp(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        let flat: Vec<f64> = va.iter().copied().collect();
        let lse = log_sum_exp(&flat)?;
        Ok(self.push(Op::LogSumExp(a), Array2::from_elem((1, 1), lse)))
    }

    /// Sum of every entry, as a `[1, 1]` node.
    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let total = sum_f64(self.value(a).iter().copied());
        Ok(self.push(Op::Sum(a), Array2::from_elem((1, 1), total)))
    }

    /// `max(a, floor)` elementwise. Clamped entries pass no gradient.
    pub fn clamp_min(&mut self, a: NodeId, floor: f64) -> Result<NodeId> {
        let out = self.value(a).mapv(|v| v.max(floor));
        Ok(self.push(Op::ClampMin(a, floor), out))
    }

    /// Column-wise maximum over rows, `[m, n] → [1, n]`.
    pub fn max_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        if va.nrows() == 0 {
            return Err(Error::Empty("max_rows"));
        }
        let out = va
            .fold_axis(Axis(0), f64::NEG_INFINITY, |&m, &v| m.max(v))
            .insert_axis(Axis(0));
        Ok(self.push(Op::MaxRows(a), out))
    }

    /// Reverse sweep from the scalar node `output`.
    pub fn backward(&self, output: NodeId) -> Result<Gradients> {
        if self.shape(output) != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("output must be scalar, got {:?}", self.shape(output)),
            ));
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Array2::ones((1, 1)));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let val = |id: NodeId| &self.nodes[id.0].value;
        match &node.op {
            Op::Constant | Op::Param => {}
            Op::MatMul(a, b) => {
                accumulate(grads, *a, g.dot(&val(*b).t()));
                accumulate(grads, *b, val(*a).t().dot(g));
            }
            Op::MatMulT(a, b) => {
                accumulate(grads, *a, g.dot(val(*b)));
                accumulate(grads, *b, g.t().dot(val(*a)));
            }
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, -g);
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, g * val(*b));
                accumulate(grads, *b, g * val(*a));
            }
            Op::AddRow(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Affine(a, scale) => accumulate(grads, *a, g * *scale),
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = val(p).ncols();
                    accumulate(grads, p, g.slice(s![.., offset..offset + w]).to_owned());
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let h = val(p).nrows();
                    accumulate(grads, p, g.slice(s![offset..offset + h, ..]).to_owned());
                    offset += h;
                }
            }
            Op::SliceCols(a, start, len) => {
                let mut full = Array2::zeros(val(*a).dim());
                full.slice_mut(s![.., *start..*start + *len]).assign(g);
                accumulate(grads, *a, full);
            }
            Op::GatherRows(a, rows) => {
                let mut full = Array2::zeros(val(*a).dim());
                for (k, &r) in rows.iter().enumerate() {
                    let mut dst = full.row_mut(r);
                    dst += &g.row(k);
                }
                accumulate(grads, *a, full);
            }
            Op::GatherElems(a, idx) => {
                let mut full = Array2::zeros(val(*a).dim());
                let cols = full.ncols();
                for (k, &i) in idx.iter().enumerate() {
                    full[[i / cols, i % cols]] += g[[0, k]];
                }
                accumulate(grads, *a, full);
            }
            Op::Tanh(a) => {
                let mut d = node.value.mapv(|y| 1.0 - y * y);
                d *= g;
                accumulate(grads, *a, d);
            }
            Op::Sigmoid(a) => {
                let mut d = node.value.mapv(|y| y * (1.0 - y));
                d *= g;
                accumulate(grads, *a, d);
            }
            Op::Relu(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(val(*a)).for_each(|d, &x| {
                    if x <= 0.0 {
                        *d = 0.0;
                    }
                });
                accumulate(grads, *a, d);
            }
            Op::SoftmaxRows(a) => {
                // dx = y ∘ (g − ⟨g, y⟩) per row
                let y = &node.value;
                let mut d = Array2::zeros(y.dim());
                for ((mut dr, yr), gr) in d.rows_mut().into_iter().zip(y.rows()).zip(g.rows()) {
                    let dot = sum_f64(yr.iter().zip(gr.iter()).map(|(a, b)| a * b));
                    Zip::from(&mut dr)
                        .and(&yr)
                        .and(&gr)
                        .for_each(|d, &y, &g| *d = y * (g - dot));
                }
                accumulate(grads, *a, d);
            }
            Op::LogSoftmaxRows(a) => {
                // dx = g − softmax(x) · Σg per row
                let y = &node.value;
                let mut d = Array2::zeros(y.dim());
                for ((mut dr, yr), gr) in d.rows_mut().into_iter().zip(y.rows()).zip(g.rows()) {
                    let total = sum_f64(gr.iter().copied());
                    Zip::from(&mut dr)
                        .and(&yr)
                        .and(&gr)
                        .for_each(|d, &y, &g| *d = g - y.exp() * total);
                }
                accumulate(grads, *a, d);
            }
            Op::LogSumExp(a) => {
                let lse = node.value[[0, 0]];
                let scale = g[[0, 0]];
                accumulate(grads, *a, val(*a).mapv(|v| (v - lse).exp() * scale));
            }
            Op::Sum(a) => {
                accumulate(grads, *a, Array2::from_elem(val(*a).dim(), g[[0, 0]]));
            }
            Op::ClampMin(a, floor) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(val(*a)).for_each(|d, &x| {
                    if x < *floor {
                        *d = 0.0;
                    }
                });
                accumulate(grads, *a, d);
            }
            Op::MaxRows(a) => {
                let va = val(*a);
                let mut full = Array2::zeros(va.dim());
                for (c, col) in va.columns().into_iter().enumerate() {
                    let best = node.value[[0, c]];
                    if let Some(r) = col.iter().position(|&v| v == best) {
                        full[[r, c]] = g[[0, c]];
                    }
                }
                accumulate(grads, *a, full);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], id: NodeId, delta: Array2<f64>) {
    match &mut grads[id.0] {
        Some(existing) => *existing += &delta,
        slot @ None => *slot = Some(delta),
    }
}

/// Adjoints produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient of the output with respect to `id`; `None` when the output
    /// does not depend on it.
    pub fn get(&self, id: NodeId) -> Option<&Array2<f64>> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to `id`, zeros when unreachable.
    pub fn get_or_zeros(&self, graph: &Graph, id: NodeId) -> Array2<f64> {
        self.get(id)
            .cloned()
            .unwrap_or_else(|| Array2::zeros(graph.shape(id)))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax with max subtraction.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Empty("softmax"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let total = sum_f64(exps.iter().copied());
    Ok(exps.into_iter().map(|e| e / total).collect())
}

pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Empty("log_sum_exp"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("log_sum_exp input".into()));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(max + sum_f64(v.iter().map(|&x| (x - max).exp())).ln())
}

/// Left-to-right summation; fixed order keeps results bit-reproducible.
pub(crate) fn sum_f64(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |acc, v| acc + v)
}
