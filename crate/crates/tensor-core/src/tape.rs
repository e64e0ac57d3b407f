//! Define-by-run reverse-mode tape over dense f64 tensors.
//!
//! A `Tape` is rebuilt for every forward pass. Operations append nodes and
//! return `TensorId` handles; `backward` replays the record in reverse and
//! accumulates adjoints for every node that (transitively) requires grad.
//! Repeated `backward` calls without `reset_grads` keep accumulating.

use crate::error::TensorError;
use crate::kernels;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(usize);

impl TensorId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Hadamard(TensorId, TensorId),
    Div(TensorId, TensorId),
    Minimum(TensorId, TensorId),
    AddBias(TensorId, TensorId),
    Affine { x: TensorId, alpha: f64 },
    Clamp { x: TensorId, lo: f64, hi: f64 },
    Relu(TensorId),
    Sigmoid(TensorId),
    Tanh(TensorId),
    Exp(TensorId),
    Ln(TensorId),
    Matmul(TensorId, TensorId),
    Transpose(TensorId),
    Bmm { a: TensorId, b: TensorId, transpose_b: bool },
    SplitHeads { x: TensorId, batch: usize, seq: usize, heads: usize },
    MergeHeads { x: TensorId, batch: usize, seq: usize, heads: usize },
    SoftmaxLast(TensorId),
    SliceCols { x: TensorId, start: usize, len: usize },
    ConcatCols(Vec<TensorId>),
    SumAll(TensorId),
    MeanAll(TensorId),
    SumLast(TensorId),
    BceWithLogits { logits: TensorId, targets: Vec<f64> },
}

struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
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

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn value(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].data
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Accumulated adjoint for `id`; zeros if backward never reached it.
    pub fn grad(&self, id: TensorId) -> Vec<f64> {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => vec![0.0; self.nodes[id.0].data.len()],
        }
    }

    pub fn reset_grads(&mut self) {
        for g in self.grads.iter_mut() {
            *g = None;
        }
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, requires_grad: bool) -> TensorId {
        debug_assert_eq!(numel(&shape), data.len());
        self.nodes.push(Node { shape, data, op, requires_grad });
        self.grads.push(None);
        TensorId(self.nodes.len() - 1)
    }

    /// Insert a constant leaf that never receives gradient.
    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> TensorId {
        assert_eq!(numel(&shape), data.len(), "constant data/shape mismatch");
        self.push(shape, data, Op::Leaf, false)
    }

    pub fn scalar(&mut self, v: f64) -> TensorId {
        self.constant(vec![1], vec![v])
    }

    /// Lease an external tensor onto the tape, honoring its `requires_grad`.
    pub fn param(&mut self, t: &Tensor) -> TensorId {
        self.push(t.shape.clone(), t.data.clone(), Op::Leaf, t.requires_grad)
    }

    fn binary_same_shape(
        &mut self,
        op_name: &'static str,
        a: TensorId,
        b: TensorId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<TensorId, TensorError> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(TensorError::ShapeMismatch {
                op: op_name,
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let data = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let rg = self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad;
        Ok(self.push(self.nodes[a.0].shape.clone(), data, op, rg))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.binary_same_shape("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.binary_same_shape("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.binary_same_shape("hadamard", a, b, |x, y| x * y, Op::Hadamard(a, b))
    }

    pub fn div(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.binary_same_shape("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn minimum(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.binary_same_shape("minimum", a, b, f64::min, Op::Minimum(a, b))
    }

    /// x[..., n] + bias[n], broadcasting over all leading axes.
    pub fn add_bias(&mut self, x: TensorId, bias: TensorId) -> Result<TensorId, TensorError> {
        let n = *self.nodes[x.0].shape.last().unwrap_or(&0);
        if self.nodes[bias.0].shape != [n] {
            return Err(TensorError::ShapeMismatch {
                op: "add_bias",
                lhs: self.nodes[x.0].shape.clone(),
                rhs: self.nodes[bias.0].shape.clone(),
            });
        }
        let mut data = self.nodes[x.0].data.clone();
        for row in data.chunks_exact_mut(n) {
            for (v, &b) in row.iter_mut().zip(&self.nodes[bias.0].data) {
                *v += b;
            }
        }
        let rg = self.nodes[x.0].requires_grad || self.nodes[bias.0].requires_grad;
        Ok(self.push(self.nodes[x.0].shape.clone(), data, Op::AddBias(x, bias), rg))
    }

    /// alpha * x + beta, elementwise.
    pub fn affine(&mut self, x: TensorId, alpha: f64, beta: f64) -> TensorId {
        let data = self.nodes[x.0].data.iter().map(|&v| alpha * v + beta).collect();
        let rg = self.nodes[x.0].requires_grad;
        self.push(self.nodes[x.0].shape.clone(), data, Op::Affine { x, alpha }, rg)
    }

    pub fn scale(&mut self, x: TensorId, alpha: f64) -> TensorId {
        self.affine(x, alpha, 0.0)
    }

    pub fn clamp(&mut self, x: TensorId, lo: f64, hi: f64) -> TensorId {
        let data = self.nodes[x.0].data.iter().map(|&v| v.clamp(lo, hi)).collect();
        let rg = self.nodes[x.0].requires_grad;
        self.push(self.nodes[x.0].shape.clone(), data, Op::Clamp { x, lo, hi }, rg)
    }

    fn unary(&mut self, x: TensorId, f: impl Fn(f64) -> f64, op: Op) -> TensorId {
        let data = self.nodes[x.0].data.iter().map(|&v| f(v)).collect();
        let rg = self.nodes[x.0].requires_grad;
        self.push(self.nodes[x.0].shape.clone(), data, op, rg)
    }

    pub fn relu(&mut self, x: TensorId) -> TensorId {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: TensorId) -> TensorId {
        self.unary(x, kernels::sigmoid_scalar, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: TensorId) -> TensorId {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn exp(&mut self, x: TensorId) -> TensorId {
        self.unary(x, f64::exp, Op::Exp(x))
    }

    pub fn ln(&mut self, x: TensorId) -> TensorId {
        self.unary(x, f64::ln, Op::Ln(x))
    }

    pub fn square(&mut self, x: TensorId) -> Result<TensorId, TensorError> {
        self.hadamard(x, x)
    }

    /// a[m×k] · b[k×n] -> [m×n]
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: sa.clone(),
                rhs: sb.clone(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let data = kernels::matmul(&self.nodes[a.0].data, &self.nodes[b.0].data, m, k, n);
        let rg = self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad;
        Ok(self.push(vec![m, n], data, Op::Matmul(a, b), rg))
    }

    pub fn transpose(&mut self, x: TensorId) -> Result<TensorId, TensorError> {
        let s = &self.nodes[x.0].shape;
        if s.len() != 2 {
            return Err(TensorError::ShapeMismatch { op: "transpose", lhs: s.clone(), rhs: vec![] });
        }
        let (m, n) = (s[0], s[1]);
        let data = kernels::transpose(&self.nodes[x.0].data, m, n);
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(vec![n, m], data, Op::Transpose(x), rg))
    }

    /// Batched matmul over leading axis: a[N×m×k] · b[N×k×n] (or b[N×n×k] when
    /// `transpose_b`).
    pub fn bmm(&mut self, a: TensorId, b: TensorId, transpose_b: bool) -> Result<TensorId, TensorError> {
        let (sa, sb) = (self.nodes[a.0].shape.clone(), self.nodes[b.0].shape.clone());
        let ok = sa.len() == 3
            && sb.len() == 3
            && sa[0] == sb[0]
            && if transpose_b { sa[2] == sb[2] } else { sa[2] == sb[1] };
        if !ok {
            return Err(TensorError::ShapeMismatch { op: "bmm", lhs: sa, rhs: sb });
        }
        let (nb, m, k) = (sa[0], sa[1], sa[2]);
        let n = if transpose_b { sb[1] } else { sb[2] };
        let mut data = vec![0.0; nb * m * n];
        for i in 0..nb {
            let av = &self.nodes[a.0].data[i * m * k..(i + 1) * m * k];
            let bv = &self.nodes[b.0].data[i * k * n..(i + 1) * k * n];
            let cv = &mut data[i * m * n..(i + 1) * m * n];
            if transpose_b {
                kernels::matmul_transb_acc(av, bv, cv, m, k, n);
            } else {
                kernels::matmul_acc(av, bv, cv, m, k, n);
            }
        }
        let rg = self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad;
        Ok(self.push(vec![nb, m, n], data, Op::Bmm { a, b, transpose_b }, rg))
    }

    /// [batch*seq, heads*hd] -> [batch*heads, seq, hd]
    pub fn split_heads(
        &mut self,
        x: TensorId,
        batch: usize,
        seq: usize,
        heads: usize,
    ) -> Result<TensorId, TensorError> {
        let s = self.nodes[x.0].shape.clone();
        if s.len() != 2 || s[0] != batch * seq || s[1] % heads != 0 {
            return Err(TensorError::ShapeMismatch {
                op: "split_heads",
                lhs: s,
                rhs: vec![batch, seq, heads],
            });
        }
        let hd = s[1] / heads;
        let src = &self.nodes[x.0].data;
        let mut data = vec![0.0; src.len()];
        for b in 0..batch {
            for h in 0..heads {
                for t in 0..seq {
                    let src_off = (b * seq + t) * heads * hd + h * hd;
                    let dst_off = ((b * heads + h) * seq + t) * hd;
                    data[dst_off..dst_off + hd].copy_from_slice(&src[src_off..src_off + hd]);
                }
            }
        }
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(vec![batch * heads, seq, hd], data, Op::SplitHeads { x, batch, seq, heads }, rg))
    }

    /// [batch*heads, seq, hd] -> [batch*seq, heads*hd]; inverse of `split_heads`.
    pub fn merge_heads(
        &mut self,
        x: TensorId,
        batch: usize,
        seq: usize,
        heads: usize,
    ) -> Result<TensorId, TensorError> {
        let s = self.nodes[x.0].shape.clone();
        if s.len() != 3 || s[0] != batch * heads || s[1] != seq {
            return Err(TensorError::ShapeMismatch {
                op: "merge_heads",
                lhs: s,
                rhs: vec![batch, seq, heads],
            });
        }
        let hd = s[2];
        let src = &self.nodes[x.0].data;
        let mut data = vec![0.0; src.len()];
        for b in 0..batch {
            for h in 0..heads {
                for t in 0..seq {
                    let src_off = ((b * heads + h) * seq + t) * hd;
                    let dst_off = (b * seq + t) * heads * hd + h * hd;
                    data[dst_off..dst_off + hd].copy_from_slice(&src[src_off..src_off + hd]);
                }
            }
        }
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(vec![batch * seq, heads * hd], data, Op::MergeHeads { x, batch, seq, heads }, rg))
    }

    /// Softmax over the trailing axis, stabilized by max subtraction.
    pub fn softmax_last(&mut self, x: TensorId) -> TensorId {
        let width = *self.nodes[x.0].shape.last().expect("softmax of empty shape");
        let data = kernels::softmax_rows(&self.nodes[x.0].data, width);
        let rg = self.nodes[x.0].requires_grad;
        self.push(self.nodes[x.0].shape.clone(), data, Op::SoftmaxLast(x), rg)
    }

    /// Columns [start, start+len) of a 2D tensor.
    pub fn slice_cols(&mut self, x: TensorId, start: usize, len: usize) -> Result<TensorId, TensorError> {
        let s = self.nodes[x.0].shape.clone();
        if s.len() != 2 || start + len > s[1] {
            return Err(TensorError::ShapeMismatch { op: "slice_cols", lhs: s, rhs: vec![start, len] });
        }
        let (rows, cols) = (s[0], s[1]);
        let src = &self.nodes[x.0].data;
        let mut data = vec![0.0; rows * len];
        for r in 0..rows {
            data[r * len..(r + 1) * len].copy_from_slice(&src[r * cols + start..r * cols + start + len]);
        }
        let rg = self.nodes[x.0].requires_grad;
        Ok(self.push(vec![rows, len], data, Op::SliceCols { x, start, len }, rg))
    }

    /// Horizontal concatenation of 2D tensors with equal row counts.
    pub fn concat_cols(&mut self, parts: &[TensorId]) -> Result<TensorId, TensorError> {
        assert!(!parts.is_empty(), "concat_cols of zero parts");
        let rows = self.nodes[parts[0].0].shape[0];
        let mut cols = 0;
        for &p in parts {
            let s = &self.nodes[p.0].shape;
            if s.len() != 2 || s[0] != rows {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.nodes[parts[0].0].shape.clone(),
                    rhs: s.clone(),
                });
            }
            cols += s[1];
        }
        let mut data = vec![0.0; rows * cols];
        let mut off = 0;
        for &p in parts {
            let pc = self.nodes[p.0].shape[1];
            for r in 0..rows {
                data[r * cols + off..r * cols + off + pc]
                    .copy_from_slice(&self.nodes[p.0].data[r * pc..(r + 1) * pc]);
            }
            off += pc;
        }
        let rg = parts.iter().any(|&p| self.nodes[p.0].requires_grad);
        Ok(self.push(vec![rows, cols], data, Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn sum_all(&mut self, x: TensorId) -> TensorId {
        let s: f64 = self.nodes[x.0].data.iter().sum();
        let rg = self.nodes[x.0].requires_grad;
        self.push(vec![1], vec![s], Op::SumAll(x), rg)
    }

    pub fn mean_all(&mut self, x: TensorId) -> TensorId {
        let n = self.nodes[x.0].data.len() as f64;
        let s: f64 = self.nodes[x.0].data.iter().sum();
        let rg = self.nodes[x.0].requires_grad;
        self.push(vec![1], vec![s / n], Op::MeanAll(x), rg)
    }

    /// Sum over the trailing axis: [..., n] -> [..., 1].
    pub fn sum_last(&mut self, x: TensorId) -> TensorId {
        let mut shape = self.nodes[x.0].shape.clone();
        let n = *shape.last().expect("sum_last of empty shape");
        *shape.last_mut().unwrap() = 1;
        let data = self.nodes[x.0].data.chunks_exact(n).map(|c| c.iter().sum()).collect();
        let rg = self.nodes[x.0].requires_grad;
        self.push(shape, data, Op::SumLast(x), rg)
    }

    /// Elementwise binary cross-entropy on logits against constant targets:
    /// max(z,0) − z·y + ln(1+e^{−|z|}).
    pub fn bce_with_logits(&mut self, logits: TensorId, targets: &[f64]) -> Result<TensorId, TensorError> {
        if self.nodes[logits.0].data.len() != targets.len() {
            return Err(TensorError::ShapeMismatch {
                op: "bce_with_logits",
                lhs: self.nodes[logits.0].shape.clone(),
                rhs: vec![targets.len()],
            });
        }
        let data = self.nodes[logits.0]
            .data
            .iter()
            .zip(targets)
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .collect();
        let rg = self.nodes[logits.0].requires_grad;
        Ok(self.push(
            self.nodes[logits.0].shape.clone(),
            data,
            Op::BceWithLogits { logits, targets: targets.to_vec() },
            rg,
        ))
    }

    fn accumulate(&mut self, id: TensorId, contrib: &[f64]) {
        let slot = &mut self.grads[id.0];
        match slot {
            Some(g) => {
                for (gv, &c) in g.iter_mut().zip(contrib) {
                    *gv += c;
                }
            }
            None => *slot = Some(contrib.to_vec()),
        }
    }

    /// Reverse sweep from a scalar loss. Accumulates adjoints into every
    /// grad-requiring node reachable from `loss`.
    pub fn backward(&mut self, loss: TensorId) -> Result<(), TensorError> {
        if self.nodes[loss.0].data.len() != 1 {
            return Err(TensorError::NotScalar { shape: self.nodes[loss.0].shape.clone() });
        }
        let mut pending: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        pending[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(grad) = pending[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.accumulate(TensorId(idx), &grad);
            let op = self.nodes[idx].op.clone();
            self.propagate(&op, idx, &grad, &mut pending);
        }
        Ok(())
    }

    fn add_pending(&self, pending: &mut [Option<Vec<f64>>], id: TensorId, contrib: Vec<f64>) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        match &mut pending[id.0] {
            Some(g) => {
                for (gv, c) in g.iter_mut().zip(contrib) {
                    *gv += c;
                }
            }
            slot @ None => *slot = Some(contrib),
        }
    }

    fn propagate(&mut self, op: &Op, out_idx: usize, g: &[f64], pending: &mut [Option<Vec<f64>>]) {
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.add_pending(pending, *a, g.to_vec());
                self.add_pending(pending, *b, g.to_vec());
            }
            Op::Sub(a, b) => {
                self.add_pending(pending, *a, g.to_vec());
                self.add_pending(pending, *b, g.iter().map(|v| -v).collect());
            }
            Op::Hadamard(a, b) => {
                let da: Vec<f64> = g.iter().zip(&self.nodes[b.0].data).map(|(&gv, &bv)| gv * bv).collect();
                let db: Vec<f64> = g.iter().zip(&self.nodes[a.0].data).map(|(&gv, &av)| gv * av).collect();
                self.add_pending(pending, *a, da);
                self.add_pending(pending, *b, db);
            }
            Op::Div(a, b) => {
                let bd = &self.nodes[b.0].data;
                let cd = &self.nodes[out_idx].data;
                let da: Vec<f64> = g.iter().zip(bd).map(|(&gv, &bv)| gv / bv).collect();
                let db: Vec<f64> = g
                    .iter()
                    .zip(cd.iter().zip(bd))
                    .map(|(&gv, (&cv, &bv))| -gv * cv / bv)
                    .collect();
                self.add_pending(pending, *a, da);
                self.add_pending(pending, *b, db);
            }
            Op::Minimum(a, b) => {
                let ad = &self.nodes[a.0].data;
                let bd = &self.nodes[b.0].data;
                let mut da = vec![0.0; g.len()];
                let mut db = vec![0.0; g.len()];
                for i in 0..g.len() {
                    if ad[i] < bd[i] {
                        da[i] = g[i];
                    } else if bd[i] < ad[i] {
                        db[i] = g[i];
                    } else {
                        da[i] = 0.5 * g[i];
                        db[i] = 0.5 * g[i];
                    }
                }
                self.add_pending(pending, *a, da);
                self.add_pending(pending, *b, db);
            }
            Op::AddBias(x, bias) => {
                self.add_pending(pending, *x, g.to_vec());
                let n = self.nodes[bias.0].data.len();
                let mut db = vec![0.0; n];
                for row in g.chunks_exact(n) {
                    for (d, &gv) in db.iter_mut().zip(row) {
                        *d += gv;
                    }
                }
                self.add_pending(pending, *bias, db);
            }
            Op::Affine { x, alpha } => {
                self.add_pending(pending, *x, g.iter().map(|&v| alpha * v).collect());
            }
            Op::Clamp { x, lo, hi } => {
                let xd = &self.nodes[x.0].data;
                let dx = g
                    .iter()
                    .zip(xd)
                    .map(|(&gv, &xv)| if xv > *lo && xv < *hi { gv } else { 0.0 })
                    .collect();
                self.add_pending(pending, *x, dx);
            }
            Op::Relu(x) => {
                let xd = &self.nodes[x.0].data;
                let dx = g.iter().zip(xd).map(|(&gv, &xv)| if xv > 0.0 { gv } else { 0.0 }).collect();
                self.add_pending(pending, *x, dx);
            }
            Op::Sigmoid(x) => {
                let yd = &self.nodes[out_idx].data;
                let dx = g.iter().zip(yd).map(|(&gv, &y)| gv * y * (1.0 - y)).collect();
                self.add_pending(pending, *x, dx);
            }
            Op::Tanh(x) => {
                let yd = &self.nodes[out_idx].data;
                let dx = g.iter().zip(yd).map(|(&gv, &y)| gv * (1.0 - y * y)).collect();
                self.add_pending(pending, *x, dx);
            }
            Op::Exp(x) => {
                let yd = &self.nodes[out_idx].data;
                let dx = g.iter().zip(yd).map(|(&gv, &y)| gv * y).collect();
                self.add_pending(pending, *x, dx);
            }
            Op::Ln(x) => {
                let xd = &self.nodes[x.0].data;
                let dx = g.iter().zip(xd).map(|(&gv, &xv)| gv / xv).collect();
                self.add_pending(pending, *x, dx);
            }
            Op::Matmul(a, b) => {
                let (m, k) = (self.nodes[a.0].shape[0], self.nodes[a.0].shape[1]);
                let n = self.nodes[b.0].shape[1];
                // dL/da = g · bᵀ  (materialize bᵀ so the axpy kernel applies)
                let bt = kernels::transpose(&self.nodes[b.0].data, k, n);
                let mut da = vec![0.0; m * k];
                kernels::matmul_acc(g, &bt, &mut da, m, n, k);
                self.add_pending(pending, *a, da);
                // dL/db = aᵀ · g
                let mut db = vec![0.0; k * n];
                kernels::matmul_transa_acc(&self.nodes[a.0].data, g, &mut db, m, k, n);
                self.add_pending(pending, *b, db);
            }
            Op::Transpose(x) => {
                let s = &self.nodes[out_idx].shape;
                self.add_pending(pending, *x, kernels::transpose(g, s[0], s[1]));
            }
            Op::Bmm { a, b, transpose_b } => {
                let sa = &self.nodes[a.0].shape;
                let (nb, m, k) = (sa[0], sa[1], sa[2]);
                let n = self.nodes[out_idx].shape[2];
                let ad = &self.nodes[a.0].data;
                let bd = &self.nodes[b.0].data;
                let mut da = vec![0.0; ad.len()];
                let mut db = vec![0.0; bd.len()];
                for i in 0..nb {
                    let gi = &g[i * m * n..(i + 1) * m * n];
                    let ai = &ad[i * m * k..(i + 1) * m * k];
                    if *transpose_b {
                        // c = a·bᵀ with b[n,k]: da = g·b ; db = gᵀ·a
                        let bi = &bd[i * n * k..(i + 1) * n * k];
                        kernels::matmul_acc(gi, bi, &mut da[i * m * k..(i + 1) * m * k], m, n, k);
                        kernels::matmul_transa_acc(gi, ai, &mut db[i * n * k..(i + 1) * n * k], m, n, k);
                    } else {
                        // c = a·b with b[k,n]: da = g·bᵀ ; db = aᵀ·g
                        let bi = &bd[i * k * n..(i + 1) * k * n];
                        kernels::matmul_transb_acc(gi, bi, &mut da[i * m * k..(i + 1) * m * k], m, n, k);
                        kernels::matmul_transa_acc(ai, gi, &mut db[i * k * n..(i + 1) * k * n], m, k, n);
                    }
                }
                self.add_pending(pending, *a, da);
                self.add_pending(pending, *b, db);
            }
            Op::SplitHeads { x, batch, seq, heads } => {
                let hd = self.nodes[out_idx].shape[2];
                let mut dx = vec![0.0; g.len()];
                for b in 0..*batch {
                    for h in 0..*heads {
                        for t in 0..*seq {
                            let dst_off = (b * seq + t) * heads * hd + h * hd;
                            let src_off = ((b * heads + h) * seq + t) * hd;
                            dx[dst_off..dst_off + hd].copy_from_slice(&g[src_off..src_off + hd]);
                        }
                    }
                }
                self.add_pending(pending, *x, dx);
            }
            Op::MergeHeads { x, batch, seq, heads } => {
                let hd = self.nodes[x.0].shape[2];
                let mut dx = vec![0.0; g.len()];
                for b in 0..*batch {
                    for h in 0..*heads {
                        for t in 0..*seq {
                            let src_off = (b * seq + t) * heads * hd + h * hd;
                            let dst_off = ((b * heads + h) * seq + t) * hd;
                            dx[dst_off..dst_off + hd].copy_from_slice(&g[src_off..src_off + hd]);
                        }
                    }
                }
                self.add_pending(pending, *x, dx);
            }
            Op::SoftmaxLast(x) => {
                let width = *self.nodes[out_idx].shape.last().unwrap();
                let yd = &self.nodes[out_idx].data;
                let mut dx = vec![0.0; g.len()];
                for ((dx_row, y_row), g_row) in dx
                    .chunks_exact_mut(width)
                    .zip(yd.chunks_exact(width))
                    .zip(g.chunks_exact(width))
                {
                    let dot: f64 = y_row.iter().zip(g_row).map(|(&y, &gv)| y * gv).sum();
                    for ((d, &y), &gv) in dx_row.iter_mut().zip(y_row).zip(g_row) {
                        *d = y * (gv - dot);
                    }
                }
                self.add_pending(pending, *x, dx);
            }
            Op::SliceCols { x, start, len } => {
                let (rows, cols) = (self.nodes[x.0].shape[0], self.nodes[x.0].shape[1]);
                let mut dx = vec![0.0; rows * cols];
                for r in 0..rows {
                    dx[r * cols + start..r * cols + start + len]
                        .copy_from_slice(&g[r * len..(r + 1) * len]);
                }
                self.add_pending(pending, *x, dx);
            }
            Op::ConcatCols(parts) => {
                let rows = self.nodes[out_idx].shape[0];
                let cols = self.nodes[out_idx].shape[1];
                let mut off = 0;
                for &p in parts {
                    let pc = self.nodes[p.0].shape[1];
                    let mut dp = vec![0.0; rows * pc];
                    for r in 0..rows {
                        dp[r * pc..(r + 1) * pc].copy_from_slice(&g[r * cols + off..r * cols + off + pc]);
                    }
                    self.add_pending(pending, p, dp);
                    off += pc;
                }
            }
            Op::SumAll(x) => {
                let n = self.nodes[x.0].data.len();
                self.add_pending(pending, *x, vec![g[0]; n]);
            }
            Op::MeanAll(x) => {
                let n = self.nodes[x.0].data.len();
                self.add_pending(pending, *x, vec![g[0] / n as f64; n]);
            }
            Op::SumLast(x) => {
                let n = *self.nodes[x.0].shape.last().unwrap();
                let mut dx = vec![0.0; self.nodes[x.0].data.len()];
                for (row, &gv) in dx.chunks_exact_mut(n).zip(g) {
                    for d in row {
                        *d = gv;
                    }
                }
                self.add_pending(pending, *x, dx);
            }
            Op::BceWithLogits { logits, targets } => {
                let zd = &self.nodes[logits.0].data;
                let dx = g
                    .iter()
                    .zip(zd.iter().zip(targets))
                    .map(|(&gv, (&z, &y))| gv * (kernels::sigmoid_scalar(z) - y))
                    .collect();
                self.add_pending(pending, *logits, dx);
            }
        }
    }
}
