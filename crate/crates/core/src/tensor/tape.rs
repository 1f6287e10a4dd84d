use std::collections::BTreeMap;
use std::sync::Arc;

use super::{DenseMatrix, TensorError};

/// Position of a node on a [`Tape`]. Ids are handed out in strictly
/// increasing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Row index list shared between the forward op and its adjoint.
pub type RowIndex = Arc<[usize]>;

/// Operation kinds, used for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    Relu,
    Sigmoid,
    Tanh,
    Exp,
    Log,
    Sum,
    SoftmaxRows,
    LogSoftmaxRows,
    Concat,
    Scale,
    AddScalar,
    Transpose,
    AddRowVector,
    MulRowVector,
    MulColumn,
    GatherRows,
    ScatterAddRows,
    Element,
}

/// A recorded operation together with its operands and constant payload.
#[derive(Debug, Clone)]
pub enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    /// Elementwise product.
    Mul(NodeId, NodeId),
    /// Elementwise quotient.
    Div(NodeId, NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Exp(NodeId),
    /// `ln(max(x, floor))`; the gradient is zero where the floor is active.
    Log {
        input: NodeId,
        floor: f64,
    },
    /// Sum of all entries into a `1 × 1` value.
    Sum(NodeId),
    SoftmaxRows(NodeId),
    LogSoftmaxRows(NodeId),
    /// Column-wise concatenation `[a | b]`.
    Concat(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId, f64),
    Transpose(NodeId),
    /// `m × n` plus a `1 × n` row broadcast over rows.
    AddRowVector(NodeId, NodeId),
    /// `m × n` times a `1 × n` row broadcast over rows.
    MulRowVector(NodeId, NodeId),
    /// `m × n` times an `m × 1` column broadcast over columns.
    MulColumn(NodeId, NodeId),
    /// Output row `q` is input row `index[q]`.
    GatherRows {
        input: NodeId,
        index: RowIndex,
    },
    /// Output row `index[q]` accumulates input row `q`; output has `rows` rows.
    ScatterAddRows {
        input: NodeId,
        index: RowIndex,
        rows: usize,
    },
    /// Single entry as a `1 × 1` value.
    Element {
        input: NodeId,
        row: usize,
        col: usize,
    },
}

impl Op {
    pub fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::Div(..) => OpKind::Div,
            Op::Relu(_) => OpKind::Relu,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Tanh(_) => OpKind::Tanh,
            Op::Exp(_) => OpKind::Exp,
            Op::Log { .. } => OpKind::Log,
            Op::Sum(_) => OpKind::Sum,
            Op::SoftmaxRows(_) => OpKind::SoftmaxRows,
            Op::LogSoftmaxRows(_) => OpKind::LogSoftmaxRows,
            Op::Concat(..) => OpKind::Concat,
            Op::Scale(..) => OpKind::Scale,
            Op::AddScalar(..) => OpKind::AddScalar,
            Op::Transpose(_) => OpKind::Transpose,
            Op::AddRowVector(..) => OpKind::AddRowVector,
            Op::MulRowVector(..) => OpKind::MulRowVector,
            Op::MulColumn(..) => OpKind::MulColumn,
            Op::GatherRows { .. } => OpKind::GatherRows,
            Op::ScatterAddRows { .. } => OpKind::ScatterAddRows,
            Op::Element { .. } => OpKind::Element,
        }
    }

    fn operands(&self) -> Vec<NodeId> {
        match *self {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::Concat(a, b)
            | Op::AddRowVector(a, b)
            | Op::MulRowVector(a, b)
            | Op::MulColumn(a, b) => vec![a, b],
            Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Exp(a)
            | Op::Sum(a)
            | Op::SoftmaxRows(a)
            | Op::LogSoftmaxRows(a)
            | Op::Scale(a, _)
            | Op::AddScalar(a, _)
            | Op::Transpose(a) => vec![a],
            Op::Log { input, .. }
            | Op::GatherRows { input, .. }
            | Op::ScatterAddRows { input, .. }
            | Op::Element { input, .. } => vec![input],
        }
    }
}

#[derive(Debug, Clone)]
struct TapeNode {
    op: Op,
    value: DenseMatrix,
}

/// Flat, eagerly evaluated record of operations.
///
/// Values are computed as soon as an op is recorded. [`Tape::backward`]
/// walks the record in reverse and returns the gradient of a scalar node
/// with respect to every leaf it depends on.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<TapeNode>,
}

/// Gradients of a scalar with respect to the leaves it depends on.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    by_leaf: BTreeMap<NodeId, DenseMatrix>,
}

impl Gradients {
    pub fn get(&self, leaf: NodeId) -> Option<&DenseMatrix> {
        self.by_leaf.get(&leaf)
    }

    /// Gradient of `leaf`, or zeros of `shape` when the loss does not depend on it.
    pub fn get_or_zeros(&self, leaf: NodeId, shape: (usize, usize)) -> DenseMatrix {
        self.by_leaf
            .get(&leaf)
            .cloned()
            .unwrap_or_else(|| DenseMatrix::zeros(shape.0, shape.1))
    }

    pub fn len(&self) -> usize {
        self.by_leaf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_leaf.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &DenseMatrix)> {
        self.by_leaf.iter().map(|(k, v)| (*k, v))
    }
}

fn same_shape(kind: OpKind, a: &DenseMatrix, b: &DenseMatrix) -> Result<(), TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            op: kind,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

fn softmax_row(input: &[f64], out: &mut [f64]) {
    let max = input.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(input) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

fn log_softmax_row(input: &[f64], out: &mut [f64]) {
    let max = input.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = input.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
    for (o, &x) in out.iter_mut().zip(input) {
        *o = x - max - log_total;
    }
}

/// Row-wise softmax of a plain matrix (max-subtracted).
pub fn softmax_rows(m: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for r in 0..m.rows() {
        softmax_row(m.row(r), out.row_mut(r));
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
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

    pub fn value(&self, id: NodeId) -> &DenseMatrix {
        &self.nodes[id.0].value
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    fn check_ref(&self, id: NodeId) -> Result<&DenseMatrix, TensorError> {
        self.nodes
            .get(id.0)
            .map(|n| &n.value)
            .ok_or(TensorError::UnknownNode(id.0))
    }

    /// Adds a differentiable input.
    pub fn leaf(&mut self, value: DenseMatrix) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(TapeNode {
            op: Op::Leaf,
            value,
        });
        id
    }

    /// Evaluates `op` and appends it. Leaves recorded through here are
    /// zero-sized; use [`Tape::leaf`] to supply a value.
    pub fn record(&mut self, op: Op) -> Result<NodeId, TensorError> {
        let kind = op.kind();
        for operand in op.operands() {
            self.check_ref(operand)?;
        }
        let value = self.evaluate(&op)?;
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: kind });
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(TapeNode { op, value });
        Ok(id)
    }

    fn evaluate(&self, op: &Op) -> Result<DenseMatrix, TensorError> {
        let kind = op.kind();
        let v = |id: &NodeId| &self.nodes[id.0].value;
        Ok(match op {
            Op::Leaf => DenseMatrix::zeros(0, 0),
            Op::MatMul(a, b) => {
                let (a, b) = (v(a), v(b));
                if a.cols() != b.rows() {
                    return Err(TensorError::ShapeMismatch {
                        op: kind,
                        left: a.shape(),
                        right: b.shape(),
                    });
                }
                a.matmul(b)
            }
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                let (x, y) = (v(a), v(b));
                same_shape(kind, x, y)?;
                match op {
                    Op::Add(..) => x.zip_map(y, |p, q| p + q),
                    Op::Sub(..) => x.zip_map(y, |p, q| p - q),
                    Op::Mul(..) => x.zip_map(y, |p, q| p * q),
                    _ => x.zip_map(y, |p, q| p / q),
                }
            }
            Op::Relu(a) => v(a).map(|x| if x > 0.0 { x } else { 0.0 }),
            Op::Sigmoid(a) => v(a).map(sigmoid),
            Op::Tanh(a) => v(a).map(f64::tanh),
            Op::Exp(a) => v(a).map(f64::exp),
            Op::Log { input, floor } => {
                let floor = *floor;
                v(input).map(|x| x.max(floor).ln())
            }
            Op::Sum(a) => DenseMatrix::scalar(v(a).sum()),
            Op::SoftmaxRows(a) => softmax_rows(v(a)),
            Op::LogSoftmaxRows(a) => {
                let a = v(a);
                let mut out = DenseMatrix::zeros(a.rows(), a.cols());
                for r in 0..a.rows() {
                    log_softmax_row(a.row(r), out.row_mut(r));
                }
                out
            }
            Op::Concat(a, b) => {
                let (a, b) = (v(a), v(b));
                if a.rows() != b.rows() {
                    return Err(TensorError::ShapeMismatch {
                        op: kind,
                        left: a.shape(),
                        right: b.shape(),
                    });
                }
                let cols = a.cols() + b.cols();
                let mut out = DenseMatrix::zeros(a.rows(), cols);
                for r in 0..a.rows() {
                    let row = out.row_mut(r);
                    row[..a.cols()].copy_from_slice(a.row(r));
                    row[a.cols()..].copy_from_slice(b.row(r));
                }
                out
            }
            Op::Scale(a, k) => {
                let k = *k;
                v(a).map(|x| x * k)
            }
            Op::AddScalar(a, k) => {
                let k = *k;
                v(a).map(|x| x + k)
            }
            Op::Transpose(a) => v(a).transpose(),
            Op::AddRowVector(a, b) | Op::MulRowVector(a, b) => {
                let (a, b) = (v(a), v(b));
                if b.rows() != 1 || b.cols() != a.cols() {
                    return Err(TensorError::ShapeMismatch {
                        op: kind,
                        left: a.shape(),
                        right: b.shape(),
                    });
                }
                let mut out = a.clone();
                let add = matches!(op, Op::AddRowVector(..));
                for r in 0..a.rows() {
                    for (o, &x) in out.row_mut(r).iter_mut().zip(b.as_slice()) {
                        if add {
                            *o += x;
                        } else {
                            *o *= x;
                        }
                    }
                }
                out
            }
            Op::MulColumn(a, b) => {
                let (a, b) = (v(a), v(b));
                if b.cols() != 1 || b.rows() != a.rows() {
                    return Err(TensorError::ShapeMismatch {
                        op: kind,
                        left: a.shape(),
                        right: b.shape(),
                    });
                }
                let mut out = a.clone();
                for r in 0..a.rows() {
                    let k = b.get(r, 0);
                    out.row_mut(r).iter_mut().for_each(|o| *o *= k);
                }
                out
            }
            Op::GatherRows { input, index } => {
                let a = v(input);
                let mut out = DenseMatrix::zeros(index.len(), a.cols());
                for (q, &r) in index.iter().enumerate() {
                    if r >= a.rows() {
                        return Err(TensorError::IndexOutOfRange {
                            op: kind,
                            index: r,
                            bound: a.rows(),
                        });
                    }
                    out.row_mut(q).copy_from_slice(a.row(r));
                }
                out
            }
            Op::ScatterAddRows { input, index, rows } => {
                let a = v(input);
                if index.len() != a.rows() {
                    return Err(TensorError::ShapeMismatch {
                        op: kind,
                        left: a.shape(),
                        right: (index.len(), 1),
                    });
                }
                let mut out = DenseMatrix::zeros(*rows, a.cols());
                for (q, &r) in index.iter().enumerate() {
                    if r >= *rows {
                        return Err(TensorError::IndexOutOfRange {
                            op: kind,
                            index: r,
                            bound: *rows,
                        });
                    }
                    for (o, &x) in out.row_mut(r).iter_mut().zip(a.row(q)) {
                        *o += x;
                    }
                }
                out
            }
            Op::Element { input, row, col } => {
                let a = v(input);
                if *row >= a.rows() || *col >= a.cols() {
                    return Err(TensorError::IndexOutOfRange {
                        op: kind,
                        index: row * a.cols() + col,
                        bound: a.len(),
                    });
                }
                DenseMatrix::scalar(a.get(*row, *col))
            }
        })
    }

    /// Reverse sweep from a `1 × 1` node. Adjoints are rebuilt from scratch
    /// on every call; the tape itself is left untouched.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, TensorError> {
        let loss_value = self.check_ref(loss)?;
        if loss_value.shape() != (1, 1) {
            return Err(TensorError::NonScalarLoss(loss_value.shape()));
        }
        let mut adjoints: Vec<Option<DenseMatrix>> = vec![None; loss.0 + 1];
        adjoints[loss.0] = Some(DenseMatrix::scalar(1.0));

        fn accumulate(slot: &mut Option<DenseMatrix>, delta: DenseMatrix) {
            match slot {
                Some(existing) => existing.add_assign(&delta),
                None => *slot = Some(delta),
            }
        }

        let mut grads = Gradients::default();
        for idx in (0..=loss.0).rev() {
            let Some(adj) = adjoints[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let val = |id: NodeId| &self.nodes[id.0].value;
            match &node.op {
                Op::Leaf => {
                    grads.by_leaf.insert(NodeId(idx), adj);
                }
                Op::MatMul(a, b) => {
                    let da = adj.matmul(&val(*b).transpose());
                    let db = val(*a).transpose().matmul(&adj);
                    accumulate(&mut adjoints[a.0], da);
                    accumulate(&mut adjoints[b.0], db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adjoints[a.0], adj.clone());
                    accumulate(&mut adjoints[b.0], adj);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adjoints[a.0], adj.clone());
                    accumulate(&mut adjoints[b.0], adj.map(|x| -x));
                }
                Op::Mul(a, b) => {
                    let da = adj.zip_map(val(*b), |g, y| g * y);
                    let db = adj.zip_map(val(*a), |g, x| g * x);
                    accumulate(&mut adjoints[a.0], da);
                    accumulate(&mut adjoints[b.0], db);
                }
                Op::Div(a, b) => {
                    let y = val(*b);
                    let da = adj.zip_map(y, |g, y| g / y);
                    // d(x/y)/dy = -(x/y)/y
                    let db = adj
                        .zip_map(&node.value, |g, q| g * q)
                        .zip_map(y, |gq, y| -gq / y);
                    accumulate(&mut adjoints[a.0], da);
                    accumulate(&mut adjoints[b.0], db);
                }
                Op::Relu(a) => {
                    let d = adj.zip_map(val(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                    accumulate(&mut adjoints[a.0], d);
                }
                Op::Sigmoid(a) => {
                    let d = adj.zip_map(&node.value, |g, s| g * s * (1.0 - s));
                    accumulate(&mut adjoints[a.0], d);
                }
                Op::Tanh(a) => {
                    let d = adj.zip_map(&node.value, |g, t| g * (1.0 - t * t));
                    accumulate(&mut adjoints[a.0], d);
                }
                Op::Exp(a) => {
                    let d = adj.zip_map(&node.value, |g, e| g * e);
                    accumulate(&mut adjoints[a.0], d);
                }
                Op::Log { input, floor } => {
                    let floor = *floor;
                    let d = adj.zip_map(val(*input), |g, x| if x > floor { g / x } else { 0.0 });
                    accumulate(&mut adjoints[input.0], d);
                }
                Op::Sum(a) => {
                    let (r, c) = val(*a).shape();
                    accumulate(&mut adjoints[a.0], DenseMatrix::filled(r, c, adj.get(0, 0)));
                }
                Op::SoftmaxRows(a) => {
                    let s = &node.value;
                    let mut d = DenseMatrix::zeros(s.rows(), s.cols());
                    for r in 0..s.rows() {
                        let dot: f64 = adj.row(r).iter().zip(s.row(r)).map(|(g, p)| g * p).sum();
                        for (c, o) in d.row_mut(r).iter_mut().enumerate() {
                            *o = s.get(r, c) * (adj.get(r, c) - dot);
                        }
                    }
                    accumulate(&mut adjoints[a.0], d);
                }
                Op::LogSoftmaxRows(a) => {
                    let ls = &node.value;
                    let mut d = DenseMatrix::zeros(ls.rows(), ls.cols());
                    for r in 0..ls.rows() {
                        let total: f64 = adj.row(r).iter().sum();
                        for (c, o) in d.row_mut(r).iter_mut().enumerate() {
                            *o = adj.get(r, c) - ls.get(r, c).exp() * total;
                        }
                    }
                    accumulate(&mut adjoints[a.0], d);
                }
                Op::Concat(a, b) => {
                    let split = val(*a).cols();
                    let rows = adj.rows();
                    let mut da = DenseMatrix::zeros(rows, split);
                    let mut db = DenseMatrix::zeros(rows, adj.cols() - split);
                    for r in 0..rows {
                        da.row_mut(r).copy_from_slice(&adj.row(r)[..split]);
                        db.row_mut(r).copy_from_slice(&adj.row(r)[split..]);
                    }
                    accumulate(&mut adjoints[a.0], da);
                    accumulate(&mut adjoints[b.0], db);
                }
                Op::Scale(a, k) => {
                    let k = *k;
                    accumulate(&mut adjoints[a.0], adj.map(|g| g * k));
                }
                Op::AddScalar(a, _) => accumulate(&mut adjoints[a.0], adj),
                Op::Transpose(a) => accumulate(&mut adjoints[a.0], adj.transpose()),
                Op::AddRowVector(a, b) => {
                    let mut db = DenseMatrix::zeros(1, adj.cols());
                    for r in 0..adj.rows() {
                        for (o, &g) in db.as_mut_slice().iter_mut().zip(adj.row(r)) {
                            *o += g;
                        }
                    }
                    accumulate(&mut adjoints[a.0], adj);
                    accumulate(&mut adjoints[b.0], db);
                }
                Op::MulRowVector(a, b) => {
                    let x = val(*a);
                    let y = val(*b);
                    let mut da = adj.clone();
                    let mut db = DenseMatrix::zeros(1, adj.cols());
                    for r in 0..adj.rows() {
                        for c in 0..adj.cols() {
                            let g = adj.get(r, c);
                            da.set(r, c, g * y.get(0, c));
                            db.as_mut_slice()[c] += g * x.get(r, c);
                        }
                    }
                    accumulate(&mut adjoints[a.0], da);
                    accumulate(&mut adjoints[b.0], db);
                }
                Op::MulColumn(a, b) => {
                    let x = val(*a);
                    let y = val(*b);
                    let mut da = adj.clone();
                    let mut db = DenseMatrix::zeros(adj.rows(), 1);
                    for r in 0..adj.rows() {
                        let k = y.get(r, 0);
                        let mut acc = 0.0;
                        for c in 0..adj.cols() {
                            let g = adj.get(r, c);
                            da.set(r, c, g * k);
                            acc += g * x.get(r, c);
                        }
                        db.set(r, 0, acc);
                    }
                    accumulate(&mut adjoints[a.0], da);
                    accumulate(&mut adjoints[b.0], db);
                }
                Op::GatherRows { input, index } => {
                    let (rows, cols) = val(*input).shape();
                    let mut d = DenseMatrix::zeros(rows, cols);
                    for (q, &r) in index.iter().enumerate() {
                        for (o, &g) in d.row_mut(r).iter_mut().zip(adj.row(q)) {
                            *o += g;
                        }
                    }
                    accumulate(&mut adjoints[input.0], d);
                }
                Op::ScatterAddRows { input, index, .. } => {
                    let mut d = DenseMatrix::zeros(index.len(), adj.cols());
                    for (q, &r) in index.iter().enumerate() {
                        d.row_mut(q).copy_from_slice(adj.row(r));
                    }
                    accumulate(&mut adjoints[input.0], d);
                }
                Op::Element { input, row, col } => {
                    let (rows, cols) = val(*input).shape();
                    let mut d = DenseMatrix::zeros(rows, cols);
                    d.set(*row, *col, adj.get(0, 0));
                    accumulate(&mut adjoints[input.0], d);
                }
            }
        }
        Ok(grads)
    }

    // Convenience wrappers around `record`.

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::Mul(a, b))
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::Div(a, b))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::Tanh(a))
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::Exp(a))
    }

    pub fn log(&mut self, a: NodeId, floor: f64) -> Result<NodeId, TensorError> {
        self.record(Op::Log { input: a, floor })
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::Sum(a))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::SoftmaxRows(a))
    }

    pub fn log_softmax_rows(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::LogSoftmaxRows(a))
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::Concat(a, b))
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> Result<NodeId, TensorError> {
        self.record(Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: NodeId, k: f64) -> Result<NodeId, TensorError> {
        self.record(Op::AddScalar(a, k))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::Transpose(a))
    }

    pub fn add_row_vector(&mut self, a: NodeId, row: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::AddRowVector(a, row))
    }

    pub fn mul_row_vector(&mut self, a: NodeId, row: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::MulRowVector(a, row))
    }

    pub fn mul_column(&mut self, a: NodeId, col: NodeId) -> Result<NodeId, TensorError> {
        self.record(Op::MulColumn(a, col))
    }

    pub fn gather_rows(&mut self, a: NodeId, index: RowIndex) -> Result<NodeId, TensorError> {
        self.record(Op::GatherRows { input: a, index })
    }

    pub fn scatter_add_rows(
        &mut self,
        a: NodeId,
        index: RowIndex,
        rows: usize,
    ) -> Result<NodeId, TensorError> {
        self.record(Op::ScatterAddRows {
            input: a,
            index,
            rows,
        })
    }

    pub fn element(&mut self, a: NodeId, row: usize, col: usize) -> Result<NodeId, TensorError> {
        self.record(Op::Element { input: a, row, col })
    }

    /// `a · bᵀ`, the layout used for `features × weightᵀ`.
    pub fn matmul_transposed(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let bt = self.transpose(b)?;
        self.matmul(a, bt)
    }
}
