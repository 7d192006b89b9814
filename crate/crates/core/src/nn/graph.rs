//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! Each forward call records a node holding its value and the operation
//! that produced it. [`Graph::backward`] walks the nodes in reverse
//! creation order (a valid reverse topological order, since inputs always
//! precede outputs) and accumulates gradients into the parameter store.

use std::collections::HashMap;

use super::tensor::{axpy, dot, matmul_acc, matmul_at_acc, matmul_bt_acc};
use super::{NnError, ParamId, ParamStore, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Input,
    Param,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Concat(Vec<NodeId>),
    SliceCols(NodeId, usize),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    LeakyRelu(NodeId, T),
    Softmax(NodeId),
    MaskedSoftmax(NodeId),
    Embedding(NodeId, Vec<usize>),
    Reshape(NodeId),
    TimeStep(NodeId, usize),
    StackTime(Vec<NodeId>),
    WeightedSumTime(NodeId, NodeId),
    Conv1d {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
        kernel: usize,
        pad_left: usize,
    },
    MaxPoolTime(NodeId, Vec<usize>),
    Dropout(NodeId, Vec<T>),
    Blend {
        new: NodeId,
        old: NodeId,
        keep: Vec<T>,
    },
    BatchNorm {
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        /// Kept in f64: with small batches the input gradient is a
        /// difference of nearly equal terms, which single precision
        /// cannot resolve.
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    SparseLinear(NodeId, Vec<Vec<(usize, T)>>),
    SoftmaxCrossEntropy(NodeId, Vec<usize>),
    CrossEntropy(NodeId, Vec<usize>),
    SumProduct(NodeId, Vec<T>),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Batch statistics computed by a training-mode batch norm, for updating
/// running averages.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    /// Biased (population) variance.
    pub var: Vec<T>,
    pub batch: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    param_nodes: HashMap<ParamId, NodeId>,
}

fn check_2d<T: Scalar>(op: &'static str, t: &Tensor<T>) -> Result<(usize, usize), NnError> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        other => Err(NnError::shape(op, format!("expected a 2-d tensor, got {other:?}"))),
    }
}

fn check_3d<T: Scalar>(op: &'static str, t: &Tensor<T>) -> Result<(usize, usize, usize), NnError> {
    match t.shape() {
        [b, l, d] => Ok((*b, *l, *d)),
        other => Err(NnError::shape(op, format!("expected a 3-d tensor, got {other:?}"))),
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn softmax_row<T: Scalar>(row: &[T], out: &mut [T], mask: Option<&[T]>) {
    let allowed = |i: usize| mask.is_none_or(|m| m[i] != T::zero());
    let max = row
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(_, &v)| v)
        .fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for (i, (o, &v)) in out.iter_mut().zip(row).enumerate() {
        *o = if allowed(i) { (v - max).exp() } else { T::zero() };
        total = total + *o;
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    /// A constant leaf.
    pub fn input(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Op::Input)
    }

    /// A leaf bound to a parameter; repeated calls reuse the same node.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> NodeId {
        if let Some(&node) = self.param_nodes.get(&id) {
            return node;
        }
        let node = self.push(store.value(id).clone(), Op::Param);
        self.param_nodes.insert(id, node);
        node
    }

    /// `[m,k] x [k,n] -> [m,n]`
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (m, k) = check_2d("matmul", self.value(a))?;
        let (k2, n) = check_2d("matmul", self.value(b))?;
        if k != k2 {
            return Err(NnError::shape("matmul", format!("[{m},{k}] x [{k2},{n}]")));
        }
        let mut out = vec![T::zero(); m * n];
        matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b)))
    }

    /// Elementwise sum of equally shaped tensors.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.same_shape("add", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::Add(a, b)))
    }

    /// Adds a bias vector `[n]` to every row of `[.., n]`.
    pub fn add_bias(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId, NnError> {
        let n = self.value(bias).len();
        if self.value(a).cols() != n || self.value(a).shape().last() != Some(&n) {
            return Err(NnError::shape(
                "add_bias",
                format!("{:?} + [{n}]", self.value(a).shape()),
            ));
        }
        let mut out = self.value(a).clone();
        let b = self.value(bias).data().to_vec();
        for row in out.data_mut().chunks_mut(n) {
            for (x, &bv) in row.iter_mut().zip(&b) {
                *x = *x + bv;
            }
        }
        Ok(self.push(out, Op::AddBias(a, bias)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        self.same_shape("mul", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::new(shape, data)?, Op::Mul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<(), NnError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(NnError::shape(
                op,
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        Ok(())
    }

    /// Concatenates 2-d tensors with equal row counts along columns.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, NnError> {
        let first = *parts
            .first()
            .ok_or(NnError::EmptyInput { op: "concat" })?;
        let rows = check_2d("concat", self.value(first))?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = check_2d("concat", self.value(p))?;
            if r != rows {
                return Err(NnError::shape("concat", format!("row counts {rows} vs {r}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        Ok(self.push(Tensor::new(vec![rows, total], out)?, Op::Concat(parts.to_vec())))
    }

    /// Columns `start..end` of a 2-d tensor.
    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId, NnError> {
        let (rows, cols) = check_2d("slice_cols", self.value(a))?;
        if start >= end || end > cols {
            return Err(NnError::shape("slice_cols", format!("{start}..{end} of {cols}")));
        }
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            out.extend_from_slice(&src[r * cols + start..r * cols + end]);
        }
        Ok(self.push(
            Tensor::new(vec![rows, end - start], out)?,
            Op::SliceCols(a, start),
        ))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(T::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(|x| x.max(T::zero()));
        self.push(out, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: NodeId, alpha: T) -> NodeId {
        let out = self
            .value(a)
            .map(|x| if x > T::zero() { x } else { alpha * x });
        self.push(out, Op::LeakyRelu(a, alpha))
    }

    /// Row-wise softmax over the last axis.
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId, NnError> {
        let (rows, cols) = check_2d("softmax", self.value(a))?;
        let mut out = Tensor::zeros(&[rows, cols]);
        for r in 0..rows {
            softmax_row(self.value(a).row(r), &mut out.data_mut()[r * cols..(r + 1) * cols], None);
        }
        Ok(self.push(out, Op::Softmax(a)))
    }

    /// Row-wise softmax restricted to positions where `mask` (same shape,
    /// 1 = valid, 0 = padding) is set; padded positions get probability 0.
    pub fn masked_softmax(&mut self, a: NodeId, mask: &Tensor<T>) -> Result<NodeId, NnError> {
        let (rows, cols) = check_2d("masked_softmax", self.value(a))?;
        if mask.shape() != self.value(a).shape() {
            return Err(NnError::shape("masked_softmax", "mask shape differs"));
        }
        let mut out = Tensor::zeros(&[rows, cols]);
        for r in 0..rows {
            let m = mask.row(r);
            if m.iter().all(|&v| v == T::zero()) {
                return Err(NnError::EmptyInput { op: "masked_softmax" });
            }
            softmax_row(self.value(a).row(r), &mut out.data_mut()[r * cols..(r + 1) * cols], Some(m));
        }
        Ok(self.push(out, Op::MaskedSoftmax(a)))
    }

    /// Gathers rows of `table [V,D]`, giving `[indices.len(), D]`.
    pub fn embedding(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId, NnError> {
        let (vocab, dim) = check_2d("embedding", self.value(table))?;
        if indices.is_empty() {
            return Err(NnError::EmptyInput { op: "embedding" });
        }
        let mut out = Vec::with_capacity(indices.len() * dim);
        for &i in indices {
            if i >= vocab {
                return Err(NnError::shape("embedding", format!("index {i} >= vocab {vocab}")));
            }
            out.extend_from_slice(self.value(table).row(i));
        }
        Ok(self.push(
            Tensor::new(vec![indices.len(), dim], out)?,
            Op::Embedding(table, indices.to_vec()),
        ))
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId, NnError> {
        let out = self.value(a).clone().reshaped(shape)?;
        Ok(self.push(out, Op::Reshape(a)))
    }

    /// `[B,L,D] -> [B,D]` at time `t`.
    pub fn time_step(&mut self, a: NodeId, t: usize) -> Result<NodeId, NnError> {
        let (b, l, d) = check_3d("time_step", self.value(a))?;
        if t >= l {
            return Err(NnError::shape("time_step", format!("step {t} of {l}")));
        }
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(b * d);
        for bi in 0..b {
            out.extend_from_slice(&src[(bi * l + t) * d..(bi * l + t + 1) * d]);
        }
        Ok(self.push(Tensor::new(vec![b, d], out)?, Op::TimeStep(a, t)))
    }

    /// `L x [B,D] -> [B,L,D]`
    pub fn stack_time(&mut self, steps: &[NodeId]) -> Result<NodeId, NnError> {
        let first = *steps.first().ok_or(NnError::EmptyInput { op: "stack_time" })?;
        let (b, d) = check_2d("stack_time", self.value(first))?;
        for &s in steps {
            if self.value(s).shape() != [b, d] {
                return Err(NnError::shape("stack_time", "steps differ in shape"));
            }
        }
        let l = steps.len();
        let mut out = vec![T::zero(); b * l * d];
        for (t, &s) in steps.iter().enumerate() {
            let src = self.value(s).data();
            for bi in 0..b {
                out[(bi * l + t) * d..(bi * l + t + 1) * d]
                    .copy_from_slice(&src[bi * d..(bi + 1) * d]);
            }
        }
        Ok(self.push(Tensor::new(vec![b, l, d], out)?, Op::StackTime(steps.to_vec())))
    }

    /// `ctx[b] = sum_t weights[b,t] * states[b,t,:]`
    pub fn weighted_sum_time(&mut self, weights: NodeId, states: NodeId) -> Result<NodeId, NnError> {
        let (b, l, d) = check_3d("weighted_sum_time", self.value(states))?;
        if self.value(weights).shape() != [b, l] {
            return Err(NnError::shape(
                "weighted_sum_time",
                format!("weights {:?} for states [{b},{l},{d}]", self.value(weights).shape()),
            ));
        }
        let w = self.value(weights).data();
        let h = self.value(states).data();
        let mut out = vec![T::zero(); b * d];
        for bi in 0..b {
            for t in 0..l {
                let a = w[bi * l + t];
                axpy(a, &h[(bi * l + t) * d..(bi * l + t + 1) * d], &mut out[bi * d..(bi + 1) * d]);
            }
        }
        Ok(self.push(
            Tensor::new(vec![b, d], out)?,
            Op::WeightedSumTime(weights, states),
        ))
    }

    /// 1-d convolution over time. `input [B,L,C]`, `weight [K*C,F]` (row
    /// `k*C + c`), `bias [F]`; zero padding of `pad_left` before and
    /// `pad_right` after the sequence.
    pub fn conv1d(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
        kernel: usize,
        pad_left: usize,
        pad_right: usize,
    ) -> Result<NodeId, NnError> {
        let (b, l, c) = check_3d("conv1d", self.value(input))?;
        let (kc, f) = check_2d("conv1d", self.value(weight))?;
        if kernel == 0 || kc != kernel * c || self.value(bias).len() != f {
            return Err(NnError::shape(
                "conv1d",
                format!("input [{b},{l},{c}], weight [{kc},{f}], kernel {kernel}"),
            ));
        }
        let padded = l + pad_left + pad_right;
        if padded < kernel {
            return Err(NnError::shape("conv1d", format!("sequence {l} shorter than kernel {kernel}")));
        }
        let out_len = padded - kernel + 1;
        let x = self.value(input).data();
        let w = self.value(weight).data();
        let bias_v = self.value(bias).data();
        let mut out = vec![T::zero(); b * out_len * f];
        for bi in 0..b {
            for t in 0..out_len {
                let o = &mut out[(bi * out_len + t) * f..(bi * out_len + t + 1) * f];
                o.copy_from_slice(bias_v);
                for k in 0..kernel {
                    let Some(src) = (t + k).checked_sub(pad_left).filter(|&s| s < l) else {
                        continue;
                    };
                    let xrow = &x[(bi * l + src) * c..(bi * l + src + 1) * c];
                    for (ci, &xv) in xrow.iter().enumerate() {
                        if xv != T::zero() {
                            axpy(xv, &w[(k * c + ci) * f..(k * c + ci + 1) * f], o);
                        }
                    }
                }
            }
        }
        Ok(self.push(
            Tensor::new(vec![b, out_len, f], out)?,
            Op::Conv1d {
                input,
                weight,
                bias,
                kernel,
                pad_left,
            },
        ))
    }

    /// `[B,T,F] -> [B,F]`, maximum over time (first maximum wins ties).
    pub fn max_pool_time(&mut self, a: NodeId) -> Result<NodeId, NnError> {
        let (b, l, f) = check_3d("max_pool_time", self.value(a))?;
        let x = self.value(a).data();
        let mut out = vec![T::neg_infinity(); b * f];
        let mut arg = vec![0usize; b * f];
        for bi in 0..b {
            for t in 0..l {
                for fi in 0..f {
                    let v = x[(bi * l + t) * f + fi];
                    if v > out[bi * f + fi] {
                        out[bi * f + fi] = v;
                        arg[bi * f + fi] = t;
                    }
                }
            }
        }
        Ok(self.push(Tensor::new(vec![b, f], out)?, Op::MaxPoolTime(a, arg)))
    }

    /// Multiplies by a fixed mask (inverted dropout: entries 0 or 1/(1-p)).
    pub fn dropout_mask(&mut self, a: NodeId, mask: Vec<T>) -> Result<NodeId, NnError> {
        if mask.len() != self.value(a).len() {
            return Err(NnError::shape("dropout", "mask length differs"));
        }
        let mut out = self.value(a).clone();
        for (x, &m) in out.data_mut().iter_mut().zip(&mask) {
            *x = *x * m;
        }
        Ok(self.push(out, Op::Dropout(a, mask)))
    }

    /// Per row `b`: `keep[b]*new + (1-keep[b])*old`. Used to freeze
    /// recurrent state on padded time steps.
    pub fn blend(&mut self, new: NodeId, old: NodeId, keep: Vec<T>) -> Result<NodeId, NnError> {
        self.same_shape("blend", new, old)?;
        let (rows, cols) = check_2d("blend", self.value(new))?;
        if keep.len() != rows {
            return Err(NnError::shape("blend", "keep length differs from rows"));
        }
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let k = keep[r];
            let n = self.value(new).row(r);
            let o = self.value(old).row(r);
            out.extend(n.iter().zip(o).map(|(&a, &b)| k * a + (T::one() - k) * b));
        }
        Ok(self.push(Tensor::new(vec![rows, cols], out)?, Op::Blend { new, old, keep }))
    }

    /// Batch normalization of `[B,F]`. With `running = None` the batch
    /// statistics are used (training) and returned; otherwise the given
    /// `(mean, var)` are used as constants (inference).
    pub fn batch_norm(
        &mut self,
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: T,
        running: Option<(&[T], &[T])>,
    ) -> Result<(NodeId, Option<BatchStats<T>>), NnError> {
        let (b, f) = check_2d("batch_norm", self.value(input))?;
        if self.value(gamma).len() != f || self.value(beta).len() != f {
            return Err(NnError::shape("batch_norm", "gamma/beta size differs from features"));
        }
        let x: Vec<f64> = self.value(input).data().iter().map(|v| v.as_f64()).collect();
        let (mean, var, stats) = match running {
            Some((m, v)) => {
                if m.len() != f || v.len() != f {
                    return Err(NnError::shape("batch_norm", "running stats size"));
                }
                let wide = |s: &[T]| s.iter().map(|v| v.as_f64()).collect::<Vec<f64>>();
                (wide(m), wide(v), None)
            }
            None => {
                let n = b as f64;
                let mut mean = vec![0.0; f];
                for r in 0..b {
                    for j in 0..f {
                        mean[j] += x[r * f + j];
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                let mut var = vec![0.0; f];
                for r in 0..b {
                    for j in 0..f {
                        let d = x[r * f + j] - mean[j];
                        var[j] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= n);
                let narrow = |s: &[f64]| s.iter().map(|&v| T::of(v)).collect::<Vec<T>>();
                let stats = BatchStats {
                    mean: narrow(&mean),
                    var: narrow(&var),
                    batch: b,
                };
                (mean, var, Some(stats))
            }
        };
        let eps = eps.as_f64();
        let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + eps).sqrt()).collect();
        let g = self.value(gamma).data();
        let bt = self.value(beta).data();
        let mut xhat = vec![0.0; b * f];
        let mut out = vec![T::zero(); b * f];
        for r in 0..b {
            for j in 0..f {
                let xh = (x[r * f + j] - mean[j]) * inv_std[j];
                xhat[r * f + j] = xh;
                out[r * f + j] = T::of(g[j].as_f64() * xh + bt[j].as_f64());
            }
        }
        let batch_stats = stats.is_some();
        let node = self.push(
            Tensor::new(vec![b, f], out)?,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            },
        );
        Ok((node, stats))
    }

    /// `out[b,:] = sum_j count_j * weight[j,:]` over sparse rows.
    pub fn sparse_linear(
        &mut self,
        weight: NodeId,
        rows: Vec<Vec<(usize, T)>>,
    ) -> Result<NodeId, NnError> {
        let (dim, n) = check_2d("sparse_linear", self.value(weight))?;
        if rows.is_empty() {
            return Err(NnError::EmptyInput { op: "sparse_linear" });
        }
        let w = self.value(weight).data();
        let mut out = vec![T::zero(); rows.len() * n];
        for (r, feats) in rows.iter().enumerate() {
            for &(j, v) in feats {
                if j >= dim {
                    return Err(NnError::shape("sparse_linear", format!("feature {j} >= {dim}")));
                }
                axpy(v, &w[j * n..(j + 1) * n], &mut out[r * n..(r + 1) * n]);
            }
        }
        Ok(self.push(
            Tensor::new(vec![rows.len(), n], out)?,
            Op::SparseLinear(weight, rows),
        ))
    }

    /// Mean negative log-likelihood of `targets` under `softmax(logits)`.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: NodeId,
        targets: &[usize],
    ) -> Result<NodeId, NnError> {
        let (b, c) = check_2d("softmax_cross_entropy", self.value(logits))?;
        self.check_targets("softmax_cross_entropy", b, c, targets)?;
        let mut probs = vec![T::zero(); c];
        let mut total = T::zero();
        for (r, &y) in targets.iter().enumerate() {
            let row = self.value(logits).row(r);
            softmax_row(row, &mut probs, None);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
            total = total + lse - row[y];
        }
        let loss = total / T::of(b as f64);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy(logits, targets.to_vec()),
        ))
    }

    /// Mean `-ln p[target]` over rows of a probability matrix.
    pub fn cross_entropy(&mut self, probs: NodeId, targets: &[usize]) -> Result<NodeId, NnError> {
        let (b, c) = check_2d("cross_entropy", self.value(probs))?;
        self.check_targets("cross_entropy", b, c, targets)?;
        let p = self.value(probs).data();
        let total: T = targets
            .iter()
            .enumerate()
            .map(|(r, &y)| -p[r * c + y].ln())
            .sum();
        let loss = total / T::of(b as f64);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy(probs, targets.to_vec())))
    }

    fn check_targets(
        &self,
        op: &'static str,
        rows: usize,
        classes: usize,
        targets: &[usize],
    ) -> Result<(), NnError> {
        if classes == 0 {
            return Err(NnError::EmptyInput { op });
        }
        if targets.len() != rows || targets.iter().any(|&y| y >= classes) {
            return Err(NnError::shape(
                op,
                format!("{} targets for [{rows},{classes}]", targets.len()),
            ));
        }
        Ok(())
    }

    /// Scalar `sum_i weights[i] * a[i]`, handy as a probe loss.
    pub fn sum_product(&mut self, a: NodeId, weights: Vec<T>) -> Result<NodeId, NnError> {
        if weights.len() != self.value(a).len() {
            return Err(NnError::shape("sum_product", "weights length differs"));
        }
        let v = dot(self.value(a).data(), &weights);
        Ok(self.push(Tensor::scalar(v), Op::SumProduct(a, weights)))
    }

    /// Back-propagates from a scalar node and adds parameter gradients
    /// into `store`. Returns the gradient of every node.
    pub fn backward(
        &self,
        loss: NodeId,
        store: &mut ParamStore<T>,
    ) -> Result<Vec<Option<Tensor<T>>>, NnError> {
        if self.value(loss).len() != 1 {
            return Err(NnError::shape("backward", "loss must be a scalar"));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), T::one()));
        for idx in (0..=loss.0).rev() {
            let Some(grad) = grads[idx].take() else {
                continue;
            };
            self.backward_node(idx, &grad, &mut grads);
            grads[idx] = Some(grad);
        }
        for (&pid, &node) in &self.param_nodes {
            if let Some(g) = &grads[node.0] {
                store.get_mut(pid).grad.add_assign(g);
            }
        }
        Ok(grads)
    }

    fn backward_node(&self, idx: usize, grad: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let node = &self.nodes[idx];
        let g = grad.data();
        let mut acc = |id: NodeId, f: &mut dyn FnMut(&mut [T])| {
            let slot = grads[id.0].get_or_insert_with(|| Tensor::zeros(self.nodes[id.0].value.shape()));
            f(slot.data_mut());
        };
        match &node.op {
            Op::Input | Op::Param => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.value(*a).rows(), self.value(*a).cols());
                let n = self.value(*b).cols();
                acc(*a, &mut |da| matmul_bt_acc(g, self.value(*b).data(), da, m, k, n));
                acc(*b, &mut |db| matmul_at_acc(self.value(*a).data(), g, db, m, k, n));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |d| axpy(T::one(), g, d));
                acc(*b, &mut |d| axpy(T::one(), g, d));
            }
            Op::AddBias(a, bias) => {
                acc(*a, &mut |d| axpy(T::one(), g, d));
                let n = self.value(*bias).len();
                acc(*bias, &mut |d| {
                    for row in g.chunks(n) {
                        axpy(T::one(), row, d);
                    }
                });
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                acc(*a, &mut |d| {
                    for i in 0..d.len() {
                        d[i] = d[i] + g[i] * vb[i];
                    }
                });
                acc(*b, &mut |d| {
                    for i in 0..d.len() {
                        d[i] = d[i] + g[i] * va[i];
                    }
                });
            }
            Op::Concat(parts) => {
                let total = node.value.cols();
                let mut offset = 0;
                for p in parts {
                    let w = self.value(*p).cols();
                    acc(*p, &mut |d| {
                        for (r, drow) in d.chunks_mut(w).enumerate() {
                            axpy(T::one(), &g[r * total + offset..r * total + offset + w], drow);
                        }
                    });
                    offset += w;
                }
            }
            Op::SliceCols(a, start) => {
                let cols = self.value(*a).cols();
                let w = node.value.cols();
                acc(*a, &mut |d| {
                    for (r, grow) in g.chunks(w).enumerate() {
                        axpy(T::one(), grow, &mut d[r * cols + start..r * cols + start + w]);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                acc(*a, &mut |d| {
                    for i in 0..d.len() {
                        d[i] = d[i] + g[i] * y[i] * (T::one() - y[i]);
                    }
                });
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                acc(*a, &mut |d| {
                    for i in 0..d.len() {
                        d[i] = d[i] + g[i] * (T::one() - y[i] * y[i]);
                    }
                });
            }
            Op::Relu(a) => {
                let x = self.value(*a).data();
                acc(*a, &mut |d| {
                    for i in 0..d.len() {
                        if x[i] > T::zero() {
                            d[i] = d[i] + g[i];
                        }
                    }
                });
            }
            Op::LeakyRelu(a, alpha) => {
                let x = self.value(*a).data();
                acc(*a, &mut |d| {
                    for i in 0..d.len() {
                        let slope = if x[i] > T::zero() { T::one() } else { *alpha };
                        d[i] = d[i] + g[i] * slope;
                    }
                });
            }
            Op::Softmax(a) | Op::MaskedSoftmax(a) => {
                let cols = node.value.cols();
                let y = node.value.data();
                acc(*a, &mut |d| {
                    for (r, drow) in d.chunks_mut(cols).enumerate() {
                        let yr = &y[r * cols..(r + 1) * cols];
                        let gr = &g[r * cols..(r + 1) * cols];
                        let s = dot(yr, gr);
                        for j in 0..cols {
                            drow[j] = drow[j] + yr[j] * (gr[j] - s);
                        }
                    }
                });
            }
            Op::Embedding(table, indices) => {
                let dim = node.value.cols();
                acc(*table, &mut |d| {
                    for (r, &i) in indices.iter().enumerate() {
                        axpy(T::one(), &g[r * dim..(r + 1) * dim], &mut d[i * dim..(i + 1) * dim]);
                    }
                });
            }
            Op::Reshape(a) => acc(*a, &mut |d| axpy(T::one(), g, d)),
            Op::TimeStep(a, t) => {
                let shape = self.value(*a).shape();
                let (l, dim) = (shape[1], shape[2]);
                acc(*a, &mut |d| {
                    for (bi, grow) in g.chunks(dim).enumerate() {
                        axpy(T::one(), grow, &mut d[(bi * l + t) * dim..(bi * l + t + 1) * dim]);
                    }
                });
            }
            Op::StackTime(steps) => {
                let shape = node.value.shape();
                let (l, dim) = (shape[1], shape[2]);
                for (t, s) in steps.iter().enumerate() {
                    acc(*s, &mut |d| {
                        for (bi, drow) in d.chunks_mut(dim).enumerate() {
                            axpy(T::one(), &g[(bi * l + t) * dim..(bi * l + t + 1) * dim], drow);
                        }
                    });
                }
            }
            Op::WeightedSumTime(weights, states) => {
                let shape = self.value(*states).shape();
                let (l, dim) = (shape[1], shape[2]);
                let w = self.value(*weights).data();
                let h = self.value(*states).data();
                acc(*weights, &mut |d| {
                    for (i, dv) in d.iter_mut().enumerate() {
                        let bi = i / l;
                        *dv = *dv + dot(&g[bi * dim..(bi + 1) * dim], &h[i * dim..(i + 1) * dim]);
                    }
                });
                acc(*states, &mut |d| {
                    for (i, drow) in d.chunks_mut(dim).enumerate() {
                        let bi = i / l;
                        axpy(w[i], &g[bi * dim..(bi + 1) * dim], drow);
                    }
                });
            }
            Op::Conv1d {
                input,
                weight,
                bias,
                kernel,
                pad_left,
            } => {
                let shape = self.value(*input).shape();
                let (b, l, c) = (shape[0], shape[1], shape[2]);
                let f = node.value.shape()[2];
                let out_len = node.value.shape()[1];
                let x = self.value(*input).data();
                let w = self.value(*weight).data();
                let src_of = |t: usize, k: usize| (t + k).checked_sub(*pad_left).filter(|&s| s < l);
                acc(*input, &mut |dx| {
                    for bi in 0..b {
                        for t in 0..out_len {
                            let go = &g[(bi * out_len + t) * f..(bi * out_len + t + 1) * f];
                            for k in 0..*kernel {
                                let Some(src) = src_of(t, k) else { continue };
                                for ci in 0..c {
                                    let idx = (bi * l + src) * c + ci;
                                    dx[idx] = dx[idx] + dot(go, &w[(k * c + ci) * f..(k * c + ci + 1) * f]);
                                }
                            }
                        }
                    }
                });
                acc(*weight, &mut |dw| {
                    for bi in 0..b {
                        for t in 0..out_len {
                            let go = &g[(bi * out_len + t) * f..(bi * out_len + t + 1) * f];
                            for k in 0..*kernel {
                                let Some(src) = src_of(t, k) else { continue };
                                for ci in 0..c {
                                    let xv = x[(bi * l + src) * c + ci];
                                    if xv != T::zero() {
                                        axpy(xv, go, &mut dw[(k * c + ci) * f..(k * c + ci + 1) * f]);
                                    }
                                }
                            }
                        }
                    }
                });
                acc(*bias, &mut |db| {
                    for go in g.chunks(f) {
                        axpy(T::one(), go, db);
                    }
                });
            }
            Op::MaxPoolTime(a, arg) => {
                let shape = self.value(*a).shape();
                let (l, f) = (shape[1], shape[2]);
                acc(*a, &mut |d| {
                    for (i, &t) in arg.iter().enumerate() {
                        let (bi, fi) = (i / f, i % f);
                        let idx = (bi * l + t) * f + fi;
                        d[idx] = d[idx] + g[i];
                    }
                });
            }
            Op::Dropout(a, mask) => {
                acc(*a, &mut |d| {
                    for i in 0..d.len() {
                        d[i] = d[i] + g[i] * mask[i];
                    }
                });
            }
            Op::Blend { new, old, keep } => {
                let cols = node.value.cols();
                acc(*new, &mut |d| {
                    for (r, drow) in d.chunks_mut(cols).enumerate() {
                        axpy(keep[r], &g[r * cols..(r + 1) * cols], drow);
                    }
                });
                acc(*old, &mut |d| {
                    for (r, drow) in d.chunks_mut(cols).enumerate() {
                        axpy(T::one() - keep[r], &g[r * cols..(r + 1) * cols], drow);
                    }
                });
            }
            Op::BatchNorm {
                input,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let f = inv_std.len();
                let b = xhat.len() / f;
                let gam = self.value(*gamma).data();
                acc(*beta, &mut |d| {
                    for row in g.chunks(f) {
                        axpy(T::one(), row, d);
                    }
                });
                acc(*gamma, &mut |d| {
                    for j in 0..f {
                        let total: f64 = (0..b).map(|r| g[r * f + j].as_f64() * xhat[r * f + j]).sum();
                        d[j] = d[j] + T::of(total);
                    }
                });
                acc(*input, &mut |dx| {
                    if !*batch_stats {
                        for r in 0..b {
                            for j in 0..f {
                                let v = g[r * f + j].as_f64() * gam[j].as_f64() * inv_std[j];
                                dx[r * f + j] = dx[r * f + j] + T::of(v);
                            }
                        }
                        return;
                    }
                    let n = b as f64;
                    for j in 0..f {
                        let dxh = |r: usize| g[r * f + j].as_f64() * gam[j].as_f64();
                        let sum_d: f64 = (0..b).map(dxh).sum();
                        let sum_dx: f64 = (0..b).map(|r| dxh(r) * xhat[r * f + j]).sum();
                        for r in 0..b {
                            let v = inv_std[j] / n * (n * dxh(r) - sum_d - xhat[r * f + j] * sum_dx);
                            dx[r * f + j] = dx[r * f + j] + T::of(v);
                        }
                    }
                });
            }
            Op::SparseLinear(weight, rows) => {
                let n = node.value.cols();
                acc(*weight, &mut |d| {
                    for (r, feats) in rows.iter().enumerate() {
                        for &(j, v) in feats {
                            axpy(v, &g[r * n..(r + 1) * n], &mut d[j * n..(j + 1) * n]);
                        }
                    }
                });
            }
            Op::SoftmaxCrossEntropy(logits, targets) => {
                let c = self.value(*logits).cols();
                let scale = g[0] / T::of(targets.len() as f64);
                let mut probs = vec![T::zero(); c];
                acc(*logits, &mut |d| {
                    for (r, &y) in targets.iter().enumerate() {
                        softmax_row(self.value(*logits).row(r), &mut probs, None);
                        probs[y] = probs[y] - T::one();
                        axpy(scale, &probs, &mut d[r * c..(r + 1) * c]);
                    }
                });
            }
            Op::CrossEntropy(probs, targets) => {
                let c = self.value(*probs).cols();
                let p = self.value(*probs).data();
                let scale = g[0] / T::of(targets.len() as f64);
                acc(*probs, &mut |d| {
                    for (r, &y) in targets.iter().enumerate() {
                        d[r * c + y] = d[r * c + y] - scale / p[r * c + y];
                    }
                });
            }
            Op::SumProduct(a, weights) => {
                acc(*a, &mut |d| axpy(g[0], weights, d));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut g = Graph::new();
        let x = g.input(t(&[1, 3], &[0.0, 0.0, 0.0]));
        let y = g.softmax(x).unwrap();
        for &p in g.value(y).data() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn leaky_relu_definition() {
        let mut g = Graph::new();
        let x = g.input(t(&[1, 2], &[-1.0, 2.0]));
        let y = g.leaky_relu(x, 0.01);
        assert_eq!(g.value(y).data(), &[-0.01, 2.0]);
    }

    #[test]
    fn fused_cross_entropy_gradient_at_zero_logits() {
        let mut store = ParamStore::<f64>::new();
        let pid = store.add("x", t(&[1, 3], &[0.0, 0.0, 0.0]));
        let mut g = Graph::new();
        let x = g.param(&store, pid);
        let loss = g.softmax_cross_entropy(x, &[0]).unwrap();
        assert!((g.value(loss).item() - 3f64.ln()).abs() < 1e-15);
        g.backward(loss, &mut store).unwrap();
        let expected = [-2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        for (a, e) in store.grad(pid).data().iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }

        // Same gradient through the unfused softmax -> cross_entropy path.
        let mut store2 = ParamStore::<f64>::new();
        let pid2 = store2.add("x", t(&[1, 3], &[0.0, 0.0, 0.0]));
        let mut g = Graph::new();
        let x = g.param(&store2, pid2);
        let p = g.softmax(x).unwrap();
        let loss = g.cross_entropy(p, &[0]).unwrap();
        g.backward(loss, &mut store2).unwrap();
        for (a, e) in store2.grad(pid2).data().iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors_are_reported() {
        let mut g = Graph::<f64>::new();
        let a = g.input(t(&[2, 3], &[0.0; 6]));
        let b = g.input(t(&[2, 3], &[0.0; 6]));
        assert!(matches!(g.matmul(a, b), Err(NnError::ShapeMismatch { .. })));
        let c = g.input(t(&[3, 2], &[0.0; 6]));
        assert!(g.add(a, c).is_err());
        let empty = g.input(t(&[2, 1], &[0.0; 2]));
        assert!(g.cross_entropy(empty, &[0, 1]).is_err());
        assert!(g.softmax_cross_entropy(a, &[0]).is_err());
    }

    #[test]
    fn masked_softmax_zeroes_padding() {
        let mut g = Graph::new();
        let x = g.input(t(&[1, 3], &[1.0, 5.0, 2.0]));
        let mask = t(&[1, 3], &[1.0, 0.0, 1.0]);
        let y = g.masked_softmax(x, &mask).unwrap();
        let p = g.value(y).data();
        assert_eq!(p[1], 0.0);
        assert!((p[0] + p[2] - 1.0).abs() < 1e-15);
        let none = t(&[1, 3], &[0.0; 3]);
        assert!(g.masked_softmax(x, &none).is_err());
    }

    #[test]
    fn conv1d_same_padding_keeps_length() {
        let mut g = Graph::new();
        let x = g.input(t(&[1, 4, 1], &[1.0, 2.0, 3.0, 4.0]));
        let w = g.input(t(&[3, 1], &[1.0, 1.0, 1.0]));
        let b = g.input(t(&[1], &[0.0]));
        let y = g.conv1d(x, w, b, 3, 1, 1).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 4, 1]);
        assert_eq!(g.value(y).data(), &[3.0, 6.0, 9.0, 7.0]);
        let pooled = g.max_pool_time(y).unwrap();
        assert_eq!(g.value(pooled).data(), &[9.0]);
    }
}
