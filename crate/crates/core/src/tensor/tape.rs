//! Operation record for reverse-mode differentiation.
//!
//! Every operation appends a node holding its value and operand handles, so
//! node order is already topological. `backward` walks the record once from
//! the root towards the front, summing contributions into each operand.

use super::{matrix_dims, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`]. Only meaningful for the tape that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Softplus,
    Exp,
    Log,
}

/// Which operand, if any, is a vector repeated over the rows of the other.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    None,
    Left,
    Right,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Binary(BinaryOp, Var, Var, Broadcast),
    Unary(Activation, Var),
    Softmax(Var),
    Sum(Var),
    Scale(Var, f64),
    AddScalar(Var),
    ConcatCols(Vec<Var>),
    Reshape(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    tracked: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, keyed by leaf handles.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a tracked leaf. `None` if the root does not depend on it.
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Like [`Gradients::get`] but yields zeros shaped like `like` when the
    /// root does not depend on the variable.
    pub fn get_or_zeros(&self, var: Var, like: &Tensor) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow. Results that would underflow to zero
/// are clamped to the smallest positive normal double so positivity holds
/// for every finite input.
pub(crate) fn softplus(x: f64) -> f64 {
    let y = if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    };
    y.max(f64::MIN_POSITIVE)
}

fn check_finite(op: &str, t: &Tensor) -> Result<()> {
    match t.first_non_finite() {
        None => Ok(()),
        Some(i) => Err(Error::Numeric(format!(
            "{} produced non-finite value {} at index {} (shape {:?})",
            op,
            t.values()[i],
            i,
            t.shape()
        ))),
    }
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

    /// Drops every node recorded after `mark` (a previous [`Tape::len`]).
    /// Handles issued after the mark become invalid.
    pub fn truncate(&mut self, mark: usize) {
        self.nodes.truncate(mark);
    }

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        check_finite("matmul", &value)?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::MatMul(a, b), tracked))
    }

    /// Pointwise `a (op) b`.
    ///
    /// Shapes must be equal, or one operand must be a rank-1 vector whose
    /// length equals the column count of the rank-2 other operand; the
    /// vector is then applied to every row. No other broadcast exists.
    pub fn elementwise(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let broadcast = broadcast_rule(va.shape(), vb.shape())?;
        let out_shape = match broadcast {
            Broadcast::Left => vb.shape().to_vec(),
            _ => va.shape().to_vec(),
        };
        let n = *out_shape.last().unwrap_or(&1);
        let total: usize = out_shape.iter().product();
        let mut out = Vec::with_capacity(total);
        for idx in 0..total {
            let (ia, ib) = operand_index(broadcast, idx, n);
            let (x, y) = (va.values()[ia], vb.values()[ib]);
            out.push(match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => x / y,
            });
        }
        let value = Tensor::new(out_shape, out)?;
        check_finite(binary_name(op), &value)?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Binary(op, a, b, broadcast), tracked))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Div, a, b)
    }

    pub fn activation(&mut self, kind: Activation, a: Var) -> Result<Var> {
        let input = self.value(a);
        if kind == Activation::Log {
            if let Some(i) = input.values().iter().position(|&v| v <= 0.0 || v.is_nan()) {
                return Err(Error::Domain(format!(
                    "log of non-positive value {} at index {}",
                    input.values()[i],
                    i
                )));
            }
        }
        let f: fn(f64) -> f64 = match kind {
            Activation::Sigmoid => sigmoid,
            Activation::Tanh => f64::tanh,
            Activation::Softplus => softplus,
            Activation::Exp => f64::exp,
            Activation::Log => f64::ln,
        };
        let value = input.map(f);
        check_finite(activation_name(kind), &value)?;
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::Unary(kind, a), tracked))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Sigmoid, a)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Tanh, a)
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Softplus, a)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Exp, a)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.activation(Activation::Log, a)
    }

    /// Softmax of a rank-1 tensor, shifted by its maximum.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let input = self.value(a);
        if input.rank() != 1 || input.is_empty() {
            return Err(Error::Dimension(format!(
                "softmax needs a non-empty vector, got shape {:?}",
                input.shape()
            )));
        }
        let max = input.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = input.values().iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let value = Tensor::vector(exps.into_iter().map(|e| e / total).collect());
        check_finite("softmax", &value)?;
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::Softmax(a), tracked))
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(a).sum());
        check_finite("sum", &value)?;
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::Sum(a), tracked))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let value = self.value(a).map(|v| v * factor);
        check_finite("scale", &value)?;
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::Scale(a, factor), tracked))
    }

    pub fn add_scalar(&mut self, a: Var, offset: f64) -> Result<Var> {
        let value = self.value(a).map(|v| v + offset);
        check_finite("add_scalar", &value)?;
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::AddScalar(a), tracked))
    }

    /// Joins rank-2 tensors with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Dimension("concat of zero tensors".into()));
        }
        let rows = matrix_dims(self.value(parts[0]))?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = matrix_dims(self.value(p))?;
            if r != rows {
                return Err(Error::Dimension(format!(
                    "concat row counts differ: {} vs {}",
                    rows, r
                )));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let value = Tensor::new(vec![rows, total], out)?;
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), tracked))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.value(a).reshape(shape)?;
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::Reshape(a), tracked))
    }

    /// Reverse accumulation from a one-element root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let root_value = &self.nodes[root.0].value;
        if !root_value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                root_value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(root.0 + 1);
        grads.resize_with(root.0 + 1, || None);
        grads[root.0] = Some(Tensor::full(root_value.shape(), 1.0));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            if let Op::Leaf = node.op {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k) = (va.rows(), va.cols());
                let n = vb.cols();
                if self.tracked(*a) {
                    // dA = G * B^T
                    let slot = slot(grads, *a, va);
                    for i in 0..m {
                        let g_row = &g.values()[i * n..(i + 1) * n];
                        for p in 0..k {
                            let b_row = &vb.values()[p * n..(p + 1) * n];
                            let dot: f64 = g_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
                            slot[i * k + p] += dot;
                        }
                    }
                }
                if self.tracked(*b) {
                    // dB = A^T * G
                    let slot = slot(grads, *b, vb);
                    for i in 0..m {
                        let g_row = &g.values()[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = va.values()[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            let out = &mut slot[p * n..(p + 1) * n];
                            for (o, &gv) in out.iter_mut().zip(g_row) {
                                *o += aip * gv;
                            }
                        }
                    }
                }
            }
            Op::Binary(op, a, b, broadcast) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let n = node.value.cols();
                let (ta, tb) = (self.tracked(*a), self.tracked(*b));
                let mut da = ta.then(|| vec![0.0; va.len()]);
                let mut db = tb.then(|| vec![0.0; vb.len()]);
                for (idx, &gv) in g.values().iter().enumerate() {
                    let (ia, ib) = operand_index(*broadcast, idx, n);
                    let (x, y) = (va.values()[ia], vb.values()[ib]);
                    let (pa, pb) = match op {
                        BinaryOp::Add => (1.0, 1.0),
                        BinaryOp::Sub => (1.0, -1.0),
                        BinaryOp::Mul => (y, x),
                        BinaryOp::Div => (1.0 / y, -x / (y * y)),
                    };
                    if let Some(d) = da.as_mut() {
                        d[ia] += gv * pa;
                    }
                    if let Some(d) = db.as_mut() {
                        d[ib] += gv * pb;
                    }
                }
                if let Some(d) = da {
                    add_into(slot(grads, *a, va), &d);
                }
                if let Some(d) = db {
                    add_into(slot(grads, *b, vb), &d);
                }
            }
            Op::Unary(kind, a) => {
                if !self.tracked(*a) {
                    return;
                }
                let x = self.value(*a);
                let y = &node.value;
                let slot = slot(grads, *a, x);
                for i in 0..x.len() {
                    let (xv, yv) = (x.values()[i], y.values()[i]);
                    let d = match kind {
                        Activation::Sigmoid => yv * (1.0 - yv),
                        Activation::Tanh => 1.0 - yv * yv,
                        Activation::Softplus => sigmoid(xv),
                        Activation::Exp => yv,
                        Activation::Log => 1.0 / xv,
                    };
                    slot[i] += g.values()[i] * d;
                }
            }
            Op::Softmax(a) => {
                if !self.tracked(*a) {
                    return;
                }
                let y = node.value.values();
                let dot: f64 = y.iter().zip(g.values()).map(|(p, q)| p * q).sum();
                let slot = slot(grads, *a, self.value(*a));
                for i in 0..y.len() {
                    slot[i] += y[i] * (g.values()[i] - dot);
                }
            }
            Op::Sum(a) => {
                if !self.tracked(*a) {
                    return;
                }
                let gv = g.values()[0];
                for s in slot(grads, *a, self.value(*a)).iter_mut() {
                    *s += gv;
                }
            }
            Op::Scale(a, factor) => {
                if !self.tracked(*a) {
                    return;
                }
                let slot = slot(grads, *a, self.value(*a));
                for (s, &gv) in slot.iter_mut().zip(g.values()) {
                    *s += gv * factor;
                }
            }
            Op::AddScalar(a) | Op::Reshape(a) => {
                if !self.tracked(*a) {
                    return;
                }
                add_into(slot(grads, *a, self.value(*a)), g.values());
            }
            Op::ConcatCols(parts) => {
                let total = node.value.cols();
                let rows = node.value.rows();
                let mut offset = 0;
                for &p in parts {
                    let width = self.value(p).cols();
                    if self.tracked(p) {
                        let slot = slot(grads, p, self.value(p));
                        for r in 0..rows {
                            let src = &g.values()[r * total + offset..r * total + offset + width];
                            add_into(&mut slot[r * width..(r + 1) * width], src);
                        }
                    }
                    offset += width;
                }
            }
        }
    }
}

fn slot<'g>(grads: &'g mut [Option<Tensor>], v: Var, like: &Tensor) -> &'g mut [f64] {
    grads[v.0]
        .get_or_insert_with(|| Tensor::zeros(like.shape()))
        .values_mut()
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn broadcast_rule(a: &[usize], b: &[usize]) -> Result<Broadcast> {
    if a == b {
        return Ok(Broadcast::None);
    }
    match (a, b) {
        ([_, n], [len]) if n == len => Ok(Broadcast::Right),
        ([len], [_, n]) if n == len => Ok(Broadcast::Left),
        _ => Err(Error::Dimension(format!(
            "incompatible shapes {:?} and {:?}; only equal shapes or a row vector over a matrix are supported",
            a, b
        ))),
    }
}

fn operand_index(broadcast: Broadcast, idx: usize, cols: usize) -> (usize, usize) {
    match broadcast {
        Broadcast::None => (idx, idx),
        Broadcast::Left => (idx % cols, idx),
        Broadcast::Right => (idx, idx % cols),
    }
}

fn binary_name(op: BinaryOp) -> &'static str {
    match op {
        BinaryOp::Add => "add",
        BinaryOp::Sub => "sub",
        BinaryOp::Mul => "mul",
        BinaryOp::Div => "div",
    }
}

fn activation_name(kind: Activation) -> &'static str {
    match kind {
        Activation::Sigmoid => "sigmoid",
        Activation::Tanh => "tanh",
        Activation::Softplus => "softplus",
        Activation::Exp => "exp",
        Activation::Log => "log",
    }
}
