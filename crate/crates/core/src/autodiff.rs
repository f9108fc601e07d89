//! Eager reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every primitive executed through a [`Var`] handle in
//! creation order, which is already a topological order of the computation.
//! [`Tape::backward`] walks the record from the loss back to the leaves,
//! so every node is visited exactly once, after all of its consumers.
//!
//! Tapes are single-threaded (`!Sync`) and meant to live for one forward
//! and backward pass.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use crate::scalar::Scalar;
use crate::tensor::{axis_split, transpose_into, MatmulPlan, Result, Tensor, TensorError};

/// Whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

enum Op<T> {
    Leaf,
    MatMul {
        a: usize,
        b: usize,
        plan: MatmulPlan,
    },
    /// `b` is broadcast over the leading axes of `a`.
    Add {
        a: usize,
        b: usize,
    },
    Mul {
        a: usize,
        b: usize,
    },
    Scale {
        a: usize,
        factor: T,
    },
    Relu {
        a: usize,
    },
    Transpose {
        a: usize,
    },
    Reshape {
        a: usize,
    },
    Concat {
        parts: Vec<usize>,
        axis: usize,
    },
    Narrow {
        a: usize,
        axis: usize,
        start: usize,
    },
    MeanAxis {
        a: usize,
        axis: usize,
    },
    Sum {
        a: usize,
    },
    Softmax {
        a: usize,
        axis: usize,
    },
    LayerNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    CrossEntropy {
        logits: usize,
        targets: Vec<usize>,
        probs: Vec<T>,
    },
    Dropout {
        a: usize,
        mask: Vec<T>,
    },
}

struct Node<T> {
    value: Arc<Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
    grad: Option<Tensor<T>>,
}

/// Record of executed operations.
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
    params: RefCell<HashMap<usize, usize>>,
    mode: Mode,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new(Mode::Train)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new(mode: Mode) -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            params: RefCell::new(HashMap::new()),
            mode,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(Arc::new(value), Op::Leaf, false)
    }

    /// Leaf that receives a gradient on [`Tape::backward`].
    pub fn variable(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(Arc::new(value), Op::Leaf, true)
    }

    /// Gradient-tracked leaf for a model parameter, registered once per tape
    /// under `key` so repeated uses share a single node.
    pub fn param(&self, key: usize, value: &Arc<Tensor<T>>) -> Var<'_, T> {
        if let Some(&id) = self.params.borrow().get(&key) {
            return Var { tape: self, id };
        }
        let var = self.push(Arc::clone(value), Op::Leaf, true);
        self.params.borrow_mut().insert(key, var.id);
        var
    }

    /// Registered parameter keys with their gradients. Only meaningful after
    /// [`Tape::backward`]; parameters the loss does not reach get zeros.
    pub fn param_grads(&self) -> Vec<(usize, Tensor<T>)> {
        let nodes = self.nodes.borrow();
        let mut out: Vec<_> = self
            .params
            .borrow()
            .iter()
            .map(|(&key, &id)| {
                let node = &nodes[id];
                let grad = node
                    .grad
                    .clone()
                    .unwrap_or_else(|| Tensor::zeros(node.value.shape()));
                (key, grad)
            })
            .collect();
        out.sort_by_key(|(k, _)| *k);
        out
    }

    /// Drops all gradient buffers; recorded values are untouched.
    pub fn clear_grads(&self) {
        for node in self.nodes.borrow_mut().iter_mut() {
            node.grad = None;
        }
    }

    pub fn concat<'t>(&'t self, parts: &[Var<'t, T>], axis: usize) -> Result<Var<'t, T>> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::Usage("concat of zero tensors".into()))?;
        let values: Vec<_> = parts.iter().map(Var::value).collect();
        let base = values[0].shape().to_vec();
        if axis >= base.len() {
            return Err(TensorError::Axis {
                op: "concat",
                axis,
                shape: base,
            });
        }
        let mut total = 0;
        for v in &values {
            let s = v.shape();
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(TensorError::Shape {
                    op: "concat",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_split(&base, axis);
        let mut shape = base.clone();
        shape[axis] = total;
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for v in &values {
                let len = v.shape()[axis];
                data.extend_from_slice(&v.data()[o * len * inner..(o + 1) * len * inner]);
            }
        }
        let requires = parts.iter().any(|p| p.requires_grad());
        let out = Tensor::new(shape, data)?;
        Ok(first.tape.push(
            Arc::new(out),
            Op::Concat {
                parts: parts.iter().map(|p| p.id).collect(),
                axis,
            },
            requires,
        ))
    }

    fn push(&self, value: Arc<Tensor<T>>, op: Op<T>, requires_grad: bool) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: usize) -> Arc<Tensor<T>> {
        Arc::clone(&self.nodes.borrow()[id].value)
    }

    fn requires(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Reverse accumulation from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_, T>) -> Result<()> {
        let mut nodes = self.nodes.borrow_mut();
        if nodes[loss.id].value.numel() != 1 {
            return Err(TensorError::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                nodes[loss.id].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(vec![T::one()]);

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            propagate(&nodes, id, &g, &mut grads);
            if matches!(node.op, Op::Leaf) {
                let shape = node.value.shape().to_vec();
                nodes[id].grad = Some(Tensor::new(shape, g)?);
            }
        }
        for node in nodes.iter_mut() {
            if node.requires_grad && matches!(node.op, Op::Leaf) && node.grad.is_none() {
                node.grad = Some(Tensor::zeros(node.value.shape()));
            }
        }
        Ok(())
    }
}

fn slot<'g, T: Scalar>(
    grads: &'g mut [Option<Vec<T>>],
    nodes: &[Node<T>],
    id: usize,
) -> Option<&'g mut Vec<T>> {
    if !nodes[id].requires_grad {
        return None;
    }
    let n = nodes[id].value.numel();
    Some(grads[id].get_or_insert_with(|| vec![T::zero(); n]))
}

fn propagate<T: Scalar>(nodes: &[Node<T>], id: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
    let node = &nodes[id];
    let out = &node.value;
    match &node.op {
        Op::Leaf => {}
        Op::MatMul { a, b, plan } => {
            let av = nodes[*a].value.data();
            let bv = nodes[*b].value.data();
            // Two separate borrow scopes: `a` and `b` may be the same node.
            if let Some(da) = slot(grads, nodes, *a) {
                plan.backward(av, bv, g, Some(da), None);
            }
            if let Some(db) = slot(grads, nodes, *b) {
                plan.backward(av, bv, g, None, Some(db));
            }
        }
        Op::Add { a, b } => {
            if let Some(da) = slot(grads, nodes, *a) {
                da.iter_mut().zip(g).for_each(|(d, &v)| *d += v);
            }
            if let Some(db) = slot(grads, nodes, *b) {
                let nb = db.len();
                for chunk in g.chunks(nb) {
                    db.iter_mut().zip(chunk).for_each(|(d, &v)| *d += v);
                }
            }
        }
        Op::Mul { a, b } => {
            let av = nodes[*a].value.data();
            let bv = nodes[*b].value.data();
            if let Some(da) = slot(grads, nodes, *a) {
                for i in 0..g.len() {
                    da[i] += g[i] * bv[i];
                }
            }
            if let Some(db) = slot(grads, nodes, *b) {
                for i in 0..g.len() {
                    db[i] += g[i] * av[i];
                }
            }
        }
        Op::Scale { a, factor } => {
            if let Some(da) = slot(grads, nodes, *a) {
                da.iter_mut().zip(g).for_each(|(d, &v)| *d += v * *factor);
            }
        }
        Op::Relu { a } => {
            let av = nodes[*a].value.data();
            if let Some(da) = slot(grads, nodes, *a) {
                for i in 0..g.len() {
                    if av[i] > T::zero() {
                        da[i] += g[i];
                    }
                }
            }
        }
        Op::Transpose { a } => {
            if let Some(da) = slot(grads, nodes, *a) {
                let s = out.shape();
                let (m, n) = (s[s.len() - 2], s[s.len() - 1]);
                let mut tmp = vec![T::zero(); m * n];
                for (gc, dc) in g.chunks(m * n).zip(da.chunks_mut(m * n)) {
                    transpose_into(gc, &mut tmp, m, n);
                    dc.iter_mut().zip(&tmp).for_each(|(d, &v)| *d += v);
                }
            }
        }
        Op::Reshape { a } => {
            if let Some(da) = slot(grads, nodes, *a) {
                da.iter_mut().zip(g).for_each(|(d, &v)| *d += v);
            }
        }
        Op::Concat { parts, axis } => {
            let (outer, total, inner) = axis_split(out.shape(), *axis);
            let mut offset = 0;
            for &p in parts {
                let len = nodes[p].value.shape()[*axis];
                if let Some(dp) = slot(grads, nodes, p) {
                    for o in 0..outer {
                        let src =
                            &g[(o * total + offset) * inner..(o * total + offset + len) * inner];
                        let dst = &mut dp[o * len * inner..(o + 1) * len * inner];
                        dst.iter_mut().zip(src).for_each(|(d, &v)| *d += v);
                    }
                }
                offset += len;
            }
        }
        Op::Narrow { a, axis, start } => {
            let full = nodes[*a].value.shape()[*axis];
            let (outer, len, inner) = axis_split(out.shape(), *axis);
            if let Some(da) = slot(grads, nodes, *a) {
                for o in 0..outer {
                    let src = &g[o * len * inner..(o + 1) * len * inner];
                    let base = (o * full + start) * inner;
                    let dst = &mut da[base..base + len * inner];
                    dst.iter_mut().zip(src).for_each(|(d, &v)| *d += v);
                }
            }
        }
        Op::MeanAxis { a, axis } => {
            let (outer, len, inner) = axis_split(nodes[*a].value.shape(), *axis);
            let inv = T::one() / T::from_usize_lossy(len);
            if let Some(da) = slot(grads, nodes, *a) {
                for o in 0..outer {
                    for l in 0..len {
                        for i in 0..inner {
                            da[(o * len + l) * inner + i] += g[o * inner + i] * inv;
                        }
                    }
                }
            }
        }
        Op::Sum { a } => {
            if let Some(da) = slot(grads, nodes, *a) {
                da.iter_mut().for_each(|d| *d += g[0]);
            }
        }
        Op::Softmax { a, axis } => {
            let (outer, len, inner) = axis_split(out.shape(), *axis);
            let y = out.data();
            if let Some(da) = slot(grads, nodes, *a) {
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |l: usize| (o * len + l) * inner + i;
                        let dot: T = (0..len).map(|l| g[at(l)] * y[at(l)]).sum();
                        for l in 0..len {
                            da[at(l)] += y[at(l)] * (g[at(l)] - dot);
                        }
                    }
                }
            }
        }
        Op::LayerNorm {
            x,
            gamma,
            beta,
            xhat,
            rstd,
        } => {
            let d = nodes[*gamma].value.numel();
            let gv = nodes[*gamma].value.data();
            if let Some(dgamma) = slot(grads, nodes, *gamma) {
                for (r, gr) in g.chunks(d).enumerate() {
                    for j in 0..d {
                        dgamma[j] += gr[j] * xhat[r * d + j];
                    }
                }
            }
            if let Some(dbeta) = slot(grads, nodes, *beta) {
                for gr in g.chunks(d) {
                    dbeta.iter_mut().zip(gr).for_each(|(b, &v)| *b += v);
                }
            }
            if let Some(dx) = slot(grads, nodes, *x) {
                let dn = T::from_usize_lossy(d);
                let mut dxhat = vec![T::zero(); d];
                for (r, gr) in g.chunks(d).enumerate() {
                    let xh = &xhat[r * d..(r + 1) * d];
                    for j in 0..d {
                        dxhat[j] = gr[j] * gv[j];
                    }
                    let s1: T = dxhat.iter().copied().sum();
                    let s2: T = dxhat.iter().zip(xh).map(|(&a, &b)| a * b).sum();
                    let k = rstd[r] / dn;
                    for j in 0..d {
                        dx[r * d + j] += k * (dn * dxhat[j] - s1 - xh[j] * s2);
                    }
                }
            }
        }
        Op::CrossEntropy {
            logits,
            targets,
            probs,
        } => {
            let batch = targets.len();
            let classes = probs.len() / batch;
            let scale = g[0] / T::from_usize_lossy(batch);
            if let Some(dl) = slot(grads, nodes, *logits) {
                for (b, &t) in targets.iter().enumerate() {
                    for c in 0..classes {
                        let onehot = if c == t { T::one() } else { T::zero() };
                        dl[b * classes + c] += (probs[b * classes + c] - onehot) * scale;
                    }
                }
            }
        }
        Op::Dropout { a, mask } => {
            if let Some(da) = slot(grads, nodes, *a) {
                for i in 0..g.len() {
                    da[i] += g[i] * mask[i];
                }
            }
        }
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T> std::fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({})", self.id)
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn value(&self) -> Arc<Tensor<T>> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires(self.id)
    }

    /// Gradient of the last backward pass, for leaves that require one.
    pub fn grad(&self) -> Option<Tensor<T>> {
        self.tape.nodes.borrow()[self.id].grad.clone()
    }

    fn unary(&self, value: Tensor<T>, op: Op<T>) -> Var<'t, T> {
        self.tape.push(Arc::new(value), op, self.requires_grad())
    }

    fn binary(&self, other: &Var<'t, T>, value: Tensor<T>, op: Op<T>) -> Var<'t, T> {
        let requires = self.requires_grad() || other.requires_grad();
        self.tape.push(Arc::new(value), op, requires)
    }

    /// Batched matrix product; see [`Tensor::matmul`] for broadcasting.
    pub fn matmul(&self, rhs: &Var<'t, T>) -> Result<Var<'t, T>> {
        let (a, b) = (self.value(), rhs.value());
        let plan = MatmulPlan::new(a.shape(), b.shape())?;
        let mut data = vec![T::zero(); plan.out_numel()];
        plan.forward(a.data(), b.data(), &mut data);
        let out = Tensor::new(plan.out_shape.clone(), data)?;
        Ok(self.binary(
            rhs,
            out,
            Op::MatMul {
                a: self.id,
                b: rhs.id,
                plan,
            },
        ))
    }

    /// Elementwise sum. `rhs` may have fewer axes than `self`, in which case
    /// its shape must equal the trailing axes of `self` and it is repeated
    /// over the leading ones (bias and positional-encoding broadcast).
    pub fn add(&self, rhs: &Var<'t, T>) -> Result<Var<'t, T>> {
        let (a, b) = (self.value(), rhs.value());
        let (sa, sb) = (a.shape(), b.shape());
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
            return Err(TensorError::Shape {
                op: "add",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let nb = b.numel();
        let data = a
            .data()
            .chunks(nb)
            .flat_map(|chunk| chunk.iter().zip(b.data()).map(|(&x, &y)| x + y))
            .collect();
        let out = Tensor::new(sa.to_vec(), data)?;
        Ok(self.binary(
            rhs,
            out,
            Op::Add {
                a: self.id,
                b: rhs.id,
            },
        ))
    }

    /// Elementwise product of equally shaped tensors.
    pub fn mul(&self, rhs: &Var<'t, T>) -> Result<Var<'t, T>> {
        let (a, b) = (self.value(), rhs.value());
        if a.shape() != b.shape() {
            return Err(TensorError::Shape {
                op: "mul",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let data = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let out = Tensor::new(a.shape().to_vec(), data)?;
        Ok(self.binary(
            rhs,
            out,
            Op::Mul {
                a: self.id,
                b: rhs.id,
            },
        ))
    }

    pub fn scale(&self, factor: T) -> Var<'t, T> {
        let out = self.value().map(|v| v * factor);
        self.unary(out, Op::Scale { a: self.id, factor })
    }

    pub fn relu(&self) -> Var<'t, T> {
        let out = self
            .value()
            .map(|v| if v > T::zero() { v } else { T::zero() });
        self.unary(out, Op::Relu { a: self.id })
    }

    /// Swap the last two axes.
    pub fn transpose(&self) -> Result<Var<'t, T>> {
        let out = self.value().transpose_last()?;
        Ok(self.unary(out, Op::Transpose { a: self.id }))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t, T>> {
        let out = self.value().reshape(shape)?;
        Ok(self.unary(out, Op::Reshape { a: self.id }))
    }

    /// Contiguous sub-range `[start, start + len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Var<'t, T>> {
        let a = self.value();
        let shape = a.shape();
        if axis >= shape.len() {
            return Err(TensorError::Axis {
                op: "narrow",
                axis,
                shape: shape.to_vec(),
            });
        }
        if len == 0 || start + len > shape[axis] {
            return Err(TensorError::Usage(format!(
                "narrow: range {start}..{} exceeds axis {axis} of {shape:?}",
                start + len
            )));
        }
        let (outer, full, inner) = axis_split(shape, axis);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            data.extend_from_slice(&a.data()[base..base + len * inner]);
        }
        let mut out_shape = shape.to_vec();
        out_shape[axis] = len;
        let out = Tensor::new(out_shape, data)?;
        Ok(self.unary(
            out,
            Op::Narrow {
                a: self.id,
                axis,
                start,
            },
        ))
    }

    /// Mean over `axis`, which is removed from the shape.
    pub fn mean_axis(&self, axis: usize) -> Result<Var<'t, T>> {
        let a = self.value();
        let shape = a.shape();
        if axis >= shape.len() {
            return Err(TensorError::Axis {
                op: "mean_axis",
                axis,
                shape: shape.to_vec(),
            });
        }
        let (outer, len, inner) = axis_split(shape, axis);
        let inv = T::one() / T::from_usize_lossy(len);
        let mut data = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for l in 0..len {
                for i in 0..inner {
                    data[o * inner + i] += a.data()[(o * len + l) * inner + i];
                }
            }
        }
        data.iter_mut().for_each(|v| *v *= inv);
        let mut out_shape: Vec<usize> = shape.to_vec();
        out_shape.remove(axis);
        if out_shape.is_empty() {
            out_shape.push(1);
        }
        let out = Tensor::new(out_shape, data)?;
        Ok(self.unary(out, Op::MeanAxis { a: self.id, axis }))
    }

    pub fn sum(&self) -> Var<'t, T> {
        let total: T = self.value().data().iter().copied().sum();
        self.unary(Tensor::scalar(total), Op::Sum { a: self.id })
    }

    /// Max-shifted softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Result<Var<'t, T>> {
        let a = self.value();
        let shape = a.shape();
        if axis >= shape.len() {
            return Err(TensorError::Axis {
                op: "softmax",
                axis,
                shape: shape.to_vec(),
            });
        }
        let (outer, len, inner) = axis_split(shape, axis);
        let x = a.data();
        let mut data = vec![T::zero(); x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |l: usize| (o * len + l) * inner + i;
                let max = (0..len).map(|l| x[at(l)]).fold(T::neg_infinity(), T::max);
                let mut z = T::zero();
                for l in 0..len {
                    let e = (x[at(l)] - max).exp();
                    data[at(l)] = e;
                    z += e;
                }
                for l in 0..len {
                    data[at(l)] /= z;
                }
            }
        }
        let out = Tensor::new(shape.to_vec(), data)?;
        Ok(self.unary(out, Op::Softmax { a: self.id, axis }))
    }

    /// Normalizes every last-axis slice with its population statistics,
    /// then applies `gamma` and `beta`.
    pub fn layer_norm(&self, gamma: &Var<'t, T>, beta: &Var<'t, T>, eps: T) -> Result<Var<'t, T>> {
        let a = self.value();
        let shape = a.shape();
        let d = *shape.last().expect("non-empty shape");
        let (gv, bv) = (gamma.value(), beta.value());
        if gv.shape() != [d] || bv.shape() != [d] {
            return Err(TensorError::Shape {
                op: "layer_norm",
                lhs: shape.to_vec(),
                rhs: gv.shape().to_vec(),
            });
        }
        let dn = T::from_usize_lossy(d);
        let rows = a.numel() / d;
        let mut xhat = vec![T::zero(); a.numel()];
        let mut rstd = vec![T::zero(); rows];
        let mut data = vec![T::zero(); a.numel()];
        for (r, row) in a.data().chunks(d).enumerate() {
            let mean = row.iter().copied().sum::<T>() / dn;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
            let inv = T::one() / (var + eps).sqrt();
            rstd[r] = inv;
            for j in 0..d {
                let h = (row[j] - mean) * inv;
                xhat[r * d + j] = h;
                data[r * d + j] = h * gv.data()[j] + bv.data()[j];
            }
        }
        let requires = self.requires_grad() || gamma.requires_grad() || beta.requires_grad();
        let out = Tensor::new(shape.to_vec(), data)?;
        Ok(self.tape.push(
            Arc::new(out),
            Op::LayerNorm {
                x: self.id,
                gamma: gamma.id,
                beta: beta.id,
                xhat,
                rstd,
            },
            requires,
        ))
    }

    /// Mean categorical cross-entropy of `[batch, classes]` logits, evaluated
    /// through log-sum-exp.
    pub fn cross_entropy(&self, targets: &[usize]) -> Result<Var<'t, T>> {
        let a = self.value();
        let shape = a.shape();
        if shape.len() != 2 || shape[0] != targets.len() {
            return Err(TensorError::Shape {
                op: "cross_entropy",
                lhs: shape.to_vec(),
                rhs: vec![targets.len()],
            });
        }
        let classes = shape[1];
        if let Some(&label) = targets.iter().find(|&&t| t >= classes) {
            return Err(TensorError::Label { label, classes });
        }
        let mut probs = vec![T::zero(); a.numel()];
        let mut total = T::zero();
        for (b, row) in a.data().chunks(classes).enumerate() {
            let lse = log_sum_exp(row);
            total += lse - row[targets[b]];
            for c in 0..classes {
                probs[b * classes + c] = (row[c] - lse).exp();
            }
        }
        let loss = total / T::from_usize_lossy(targets.len());
        Ok(self.unary(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits: self.id,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    /// Inverted dropout with drop probability `rate`. Identity on an
    /// evaluation tape or when `rate` is zero.
    pub fn dropout<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> Result<Var<'t, T>> {
        if !(0.0..1.0).contains(&rate) {
            return Err(TensorError::Usage(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        if self.tape.mode == Mode::Eval || rate == 0.0 {
            return Ok(*self);
        }
        let keep = T::lit(1.0 / (1.0 - rate));
        let a = self.value();
        let mask: Vec<T> = (0..a.numel())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data = a.data().iter().zip(&mask).map(|(&x, &m)| x * m).collect();
        let out = Tensor::new(a.shape().to_vec(), data)?;
        Ok(self.unary(out, Op::Dropout { a: self.id, mask }))
    }
}

/// `ln Σ exp(xᵢ)` without overflow.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    let s: T = xs.iter().map(|&v| (v - max).exp()).sum();
    max + s.ln()
}
