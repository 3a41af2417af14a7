use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{matmul, matmul_nt, matmul_tn, Matrix};

/// Index of a node on the tape.
pub type NodeId = usize;

/// Recorded operation. Inputs are tape indices of earlier nodes, so the
/// tape is a topologically ordered Wengert list and the backward pass is a
/// single reverse sweep.
#[derive(Debug, Clone)]
enum Op {
    /// Leaf that receives a gradient.
    Input,
    /// Leaf that does not (targets, observations, positional codes, ...).
    Constant,
    /// A·B
    MatMul(NodeId, NodeId),
    /// A·Bᵀ (B stored n×k); used for `x·Wᵀ` and attention scores.
    MatMulNT(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    /// Hadamard product.
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    /// 1 - x elementwise.
    OneMinus(NodeId),
    /// M(m×n) + row(1×n), broadcast over rows.
    AddRow(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    /// Row-wise softmax with max subtraction.
    SoftmaxRows(NodeId),
    ConcatRows(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    /// Rows [start, end).
    SliceRows(NodeId, usize, usize),
    /// mean((a - b)²) over all entries → 1×1.
    MeanSqDiff(NodeId, NodeId),
    /// Mean over entries of max(z,0) - z·t + ln(1 + e^{-|z|}) → 1×1.
    /// Numerically stable binary cross-entropy on logits z with targets t.
    BceWithLogits(NodeId, NodeId),
}

/// Eager-evaluating reverse-mode tape over `Matrix` values.
pub struct Tape {
    ops: Vec<Op>,
    values: Vec<Matrix>,
}

/// Gradients of one scalar output with respect to every tape node.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient for `id`; `None` when the node does not influence the loss.
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads[id].as_ref()
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            ops: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.values[id]
    }

    fn push(&mut self, op: Op, value: Matrix) -> NodeId {
        self.ops.push(op);
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn input(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(Op::Constant, value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = matmul(&self.values[a], &self.values[b]);
        self.push(Op::MatMul(a, b), v)
    }

    /// A·Bᵀ with B stored as n×k.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = matmul_nt(&self.values[a], &self.values[b]);
        self.push(Op::MatMulNT(a, b), v)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.values[a], &self.values[b]);
        assert_eq!(va.shape(), vb.shape(), "add shape");
        let data = va.data.iter().zip(vb.data.iter()).map(|(x, y)| x + y).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.values[a], &self.values[b]);
        assert_eq!(va.shape(), vb.shape(), "sub shape");
        let data = va.data.iter().zip(vb.data.iter()).map(|(x, y)| x - y).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.values[a], &self.values[b]);
        assert_eq!(va.shape(), vb.shape(), "mul shape");
        let data = va.data.iter().zip(vb.data.iter()).map(|(x, y)| x * y).collect();
        let v = Matrix::from_vec(va.rows, va.cols, data);
        self.push(Op::Mul(a, b), v)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.values[a].map(|x| c * x);
        self.push(Op::Scale(a, c), v)
    }

    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a].map(|x| 1.0 - x);
        self.push(Op::OneMinus(a), v)
    }

    /// Broadcast-add a 1×n row vector to every row of an m×n matrix.
    pub fn add_row(&mut self, m: NodeId, row: NodeId) -> NodeId {
        let (vm, vr) = (&self.values[m], &self.values[row]);
        assert_eq!(vr.rows, 1, "add_row expects 1×n row");
        assert_eq!(vm.cols, vr.cols, "add_row width");
        let mut out = vm.clone();
        for r in 0..out.rows {
            for (o, &b) in out.row_mut(r).iter_mut().zip(vr.data.iter()) {
                *o += b;
            }
        }
        self.push(Op::AddRow(m, row), out)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a].map(sigmoid_scalar);
        self.push(Op::Sigmoid(a), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a].map(libm::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.values[a].map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(Op::Relu(a), v)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let v = softmax_rows_value(&self.values[a]);
        self.push(Op::SoftmaxRows(a), v)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let cols = self.values[parts[0]].cols;
        let rows: usize = parts.iter().map(|&p| self.values[p].rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for &p in parts {
            let v = &self.values[p];
            assert_eq!(v.cols, cols, "concat_rows width");
            data.extend_from_slice(&v.data);
        }
        let v = Matrix::from_vec(rows, cols, data);
        self.push(Op::ConcatRows(parts.to_vec()), v)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.values[parts[0]].rows;
        let cols: usize = parts.iter().map(|&p| self.values[p].cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut off = 0;
        for &p in parts {
            let v = &self.values[p];
            assert_eq!(v.rows, rows, "concat_cols height");
            for r in 0..rows {
                out.row_mut(r)[off..off + v.cols].copy_from_slice(v.row(r));
            }
            off += v.cols;
        }
        self.push(Op::ConcatCols(parts.to_vec()), out)
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, end: usize) -> NodeId {
        let v = &self.values[a];
        assert!(start < end && end <= v.rows, "slice_rows range");
        let data = v.data[start * v.cols..end * v.cols].to_vec();
        let out = Matrix::from_vec(end - start, v.cols, data);
        self.push(Op::SliceRows(a, start, end), out)
    }

    /// mean((a-b)²) → 1×1 scalar node.
    pub fn mean_sq_diff(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.values[a], &self.values[b]);
        assert_eq!(va.shape(), vb.shape(), "mean_sq_diff shape");
        let n = va.data.len() as f64;
        let s: f64 = va
            .data
            .iter()
            .zip(vb.data.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        self.push(Op::MeanSqDiff(a, b), Matrix::row_vec(vec![s / n]))
    }

    /// Mean binary cross-entropy over logits `a` with targets `b` → 1×1.
    pub fn bce_with_logits(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.values[a], &self.values[b]);
        assert_eq!(va.shape(), vb.shape(), "bce shape");
        let n = va.data.len() as f64;
        let s: f64 = va
            .data
            .iter()
            .zip(vb.data.iter())
            .map(|(&z, &t)| {
                let zmax = if z > 0.0 { z } else { 0.0 };
                zmax - z * t + libm::log1p(libm::exp(-libm::fabs(z)))
            })
            .sum();
        self.push(Op::BceWithLogits(a, b), Matrix::row_vec(vec![s / n]))
    }

    /// Reverse sweep from a 1×1 scalar node.
    pub fn backward(&self, loss: NodeId) -> Gradients {
        assert_eq!(
            self.values[loss].shape(),
            (1, 1),
            "backward expects a scalar node"
        );
        let mut grads: Vec<Option<Matrix>> = vec![None; self.values.len()];
        grads[loss] = Some(Matrix::row_vec(vec![1.0]));

        for id in (0..=loss).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            self.accumulate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, id: NodeId, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let add_to = |grads: &mut [Option<Matrix>], target: NodeId, delta: Matrix| {
            match &mut grads[target] {
                Some(acc) => {
                    for (a, d) in acc.data.iter_mut().zip(delta.data.iter()) {
                        *a += d;
                    }
                }
                slot @ None => *slot = Some(delta),
            }
        };

        match &self.ops[id] {
            Op::Input | Op::Constant => {}
            Op::MatMul(a, b) => {
                // dA = G·Bᵀ, dB = Aᵀ·G
                add_to(grads, *a, matmul_nt(g, &self.values[*b]));
                add_to(grads, *b, matmul_tn(&self.values[*a], g));
            }
            Op::MatMulNT(a, b) => {
                // Y = A·Bᵀ: dA = G·B, dB = Gᵀ·A
                add_to(grads, *a, matmul(g, &self.values[*b]));
                add_to(grads, *b, matmul_tn(g, &self.values[*a]));
            }
            Op::Add(a, b) => {
                add_to(grads, *a, g.clone());
                add_to(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                add_to(grads, *a, g.clone());
                add_to(grads, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let da = hadamard(g, &self.values[*b]);
                let db = hadamard(g, &self.values[*a]);
                add_to(grads, *a, da);
                add_to(grads, *b, db);
            }
            Op::Scale(a, c) => add_to(grads, *a, g.map(|x| c * x)),
            Op::OneMinus(a) => add_to(grads, *a, g.map(|x| -x)),
            Op::AddRow(m, row) => {
                add_to(grads, *m, g.clone());
                let mut dr = Matrix::zeros(1, g.cols);
                for r in 0..g.rows {
                    for (d, &x) in dr.data.iter_mut().zip(g.row(r).iter()) {
                        *d += x;
                    }
                }
                add_to(grads, *row, dr);
            }
            Op::Sigmoid(a) => {
                let y = &self.values[id];
                let data = g
                    .data
                    .iter()
                    .zip(y.data.iter())
                    .map(|(&gv, &yv)| gv * yv * (1.0 - yv))
                    .collect();
                add_to(grads, *a, Matrix::from_vec(g.rows, g.cols, data));
            }
            Op::Tanh(a) => {
                let y = &self.values[id];
                let data = g
                    .data
                    .iter()
                    .zip(y.data.iter())
                    .map(|(&gv, &yv)| gv * (1.0 - yv * yv))
                    .collect();
                add_to(grads, *a, Matrix::from_vec(g.rows, g.cols, data));
            }
            Op::Relu(a) => {
                let x = &self.values[*a];
                let data = g
                    .data
                    .iter()
                    .zip(x.data.iter())
                    .map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 })
                    .collect();
                add_to(grads, *a, Matrix::from_vec(g.rows, g.cols, data));
            }
            Op::SoftmaxRows(a) => {
                // dX_row = y ⊙ (g - (g·y)) per row.
                let y = &self.values[id];
                let mut dx = Matrix::zeros(g.rows, g.cols);
                for r in 0..g.rows {
                    let dot: f64 = g
                        .row(r)
                        .iter()
                        .zip(y.row(r).iter())
                        .map(|(a, b)| a * b)
                        .sum();
                    for ((d, &gv), &yv) in dx
                        .row_mut(r)
                        .iter_mut()
                        .zip(g.row(r).iter())
                        .zip(y.row(r).iter())
                    {
                        *d = yv * (gv - dot);
                    }
                }
                add_to(grads, *a, dx);
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let rows = self.values[p].rows;
                    let cols = self.values[p].cols;
                    let data = g.data[start * cols..(start + rows) * cols].to_vec();
                    add_to(grads, p, Matrix::from_vec(rows, cols, data));
                    start += rows;
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let v = &self.values[p];
                    let mut d = Matrix::zeros(v.rows, v.cols);
                    for r in 0..v.rows {
                        d.row_mut(r).copy_from_slice(&g.row(r)[off..off + v.cols]);
                    }
                    add_to(grads, p, d);
                    off += v.cols;
                }
            }
            Op::SliceRows(a, start, end) => {
                let v = &self.values[*a];
                let mut d = Matrix::zeros(v.rows, v.cols);
                d.data[start * v.cols..end * v.cols].copy_from_slice(&g.data);
                add_to(grads, *a, d);
            }
            Op::MeanSqDiff(a, b) => {
                let (va, vb) = (&self.values[*a], &self.values[*b]);
                let n = va.data.len() as f64;
                let gs = g.data[0];
                let da: Vec<f64> = va
                    .data
                    .iter()
                    .zip(vb.data.iter())
                    .map(|(x, y)| gs * 2.0 / n * (x - y))
                    .collect();
                let db: Vec<f64> = da.iter().map(|x| -x).collect();
                add_to(grads, *a, Matrix::from_vec(va.rows, va.cols, da));
                add_to(grads, *b, Matrix::from_vec(va.rows, va.cols, db));
            }
            Op::BceWithLogits(a, b) => {
                // d/dz mean BCE = (σ(z) - t)/n; targets get -z-term gradient
                // but are constants in practice.
                let (va, vb) = (&self.values[*a], &self.values[*b]);
                let n = va.data.len() as f64;
                let gs = g.data[0];
                let da: Vec<f64> = va
                    .data
                    .iter()
                    .zip(vb.data.iter())
                    .map(|(&z, &t)| gs * (sigmoid_scalar(z) - t) / n)
                    .collect();
                let db: Vec<f64> = va.data.iter().map(|&z| gs * (-z) / n).collect();
                add_to(grads, *a, Matrix::from_vec(va.rows, va.cols, da));
                add_to(grads, *b, Matrix::from_vec(va.rows, va.cols, db));
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_rows_value(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = libm::exp(*v - mx);
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn hadamard(a: &Matrix, b: &Matrix) -> Matrix {
    let data = a.data.iter().zip(b.data.iter()).map(|(x, y)| x * y).collect();
    Matrix::from_vec(a.rows, a.cols, data)
}
