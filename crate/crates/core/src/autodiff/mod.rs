//! Dense reverse-mode differentiation.
//!
//! A [`Tape`] records every operation applied to its variables. Calling
//! [`Tape::backward`] on a scalar output walks the record in reverse and
//! accumulates `∂output/∂leaf` into every leaf created with [`Tape::leaf`].
//! Leaves made with [`Tape::constant`] never receive gradients.
//!
//! Every operation checks its result for NaN/Inf and fails with
//! [`AutodiffError::NonFinite`] naming the operation, so a diverging
//! computation is reported at the first op that produced a bad value.
//!
//! Gradients accumulate: calling `backward` twice without
//! [`Tape::zero_grad`] sums both passes into the leaf gradients.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod params;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use params::{ParamId, ParamStore};

use crate::matrix::{dot, Matrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Negative-side slope of [`Activation::LeakyRelu`].
pub const LEAKY_RELU_SLOPE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: (usize, usize), rhs: (usize, usize) },
    #[error("{op}: segment {segment} is empty")]
    EmptySegment { op: &'static str, segment: usize },
    #[error("{op}: invalid segment boundaries ({reason})")]
    InvalidSegments { op: &'static str, reason: String },
    #[error("{op}: index {index} out of range for {len} rows")]
    IndexOutOfRange { op: &'static str, index: usize, len: usize },
    #[error("backward requires a 1x1 output, got {rows}x{cols}")]
    NonScalar { rows: usize, cols: usize },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: String },
    #[error("{op}: needs at least one input")]
    NoInputs { op: &'static str },
}

pub type Result<T, E = AutodiffError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Elu,
    /// Leaky ReLU with slope [`LEAKY_RELU_SLOPE`].
    LeakyRelu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_RELU_SLOPE * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative given the input `x` and the output `y = apply(x)`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    y + 1.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Elu => "elu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How the right operand of `add`/`mul` is expanded to the left operand's shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Broadcast {
    Same,
    Column,
    Row,
    Scalar,
}

impl Broadcast {
    fn resolve(op: &'static str, lhs: (usize, usize), rhs: (usize, usize)) -> Result<Self> {
        match rhs {
            r if r == lhs => Ok(Broadcast::Same),
            (1, 1) => Ok(Broadcast::Scalar),
            (r, 1) if r == lhs.0 => Ok(Broadcast::Column),
            (1, c) if c == lhs.1 => Ok(Broadcast::Row),
            _ => Err(AutodiffError::ShapeMismatch { op, lhs, rhs }),
        }
    }

    #[inline]
    fn at(self, m: &Matrix, r: usize, c: usize) -> f64 {
        match self {
            Broadcast::Same => m.get(r, c),
            Broadcast::Column => m.get(r, 0),
            Broadcast::Row => m.get(0, c),
            Broadcast::Scalar => m.get(0, 0),
        }
    }

    /// Sums a full-shape gradient back down to the operand's shape.
    fn reduce(self, g: Matrix, shape: (usize, usize)) -> Matrix {
        match self {
            Broadcast::Same => g,
            Broadcast::Scalar => Matrix::scalar(g.sum()),
            Broadcast::Column => {
                Matrix::from_vec(shape.0, 1, g.row_iter().map(|r| r.iter().sum()).collect())
            }
            Broadcast::Row => {
                let mut out = Matrix::zeros(1, shape.1);
                for r in g.row_iter() {
                    for (o, v) in out.as_mut_slice().iter_mut().zip(r) {
                        *o += v;
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var, Broadcast),
    Mul(Var, Var, Broadcast),
    Scale(Var, f64),
    Activate(Var, Activation),
    Exp(Var),
    Log(Var),
    L2NormalizeRows(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    MaskedMeanRows { x: Var, offsets: Vec<usize>, members: Vec<usize> },
    SegmentSoftmax(Var, Vec<usize>),
    SegmentWeightedSum { weights: Var, values: Var, index: Vec<usize>, offsets: Vec<usize> },
    EdgeDot { a: Var, b: Var, src: Vec<usize>, dst: Vec<usize> },
    SumRows(Var),
    SumAll(Var),
    MeanAll(Var),
}

impl Op {
    fn name(&self) -> String {
        match self {
            Op::Leaf => "leaf".into(),
            Op::MatMul(..) => "matmul".into(),
            Op::MatMulNt(..) => "matmul_nt".into(),
            Op::Add(..) => "add".into(),
            Op::Mul(..) => "mul".into(),
            Op::Scale(..) => "scale".into(),
            Op::Activate(_, a) => a.name().into(),
            Op::Exp(_) => "exp".into(),
            Op::Log(_) => "log".into(),
            Op::L2NormalizeRows(_) => "l2_normalize_rows".into(),
            Op::ConcatCols(_) => "row_concat".into(),
            Op::ConcatRows(_) => "concat_rows".into(),
            Op::GatherRows(..) => "gather_rows".into(),
            Op::MaskedMeanRows { .. } => "masked_mean_rows".into(),
            Op::SegmentSoftmax(..) => "segment_softmax".into(),
            Op::SegmentWeightedSum { .. } => "segment_weighted_sum".into(),
            Op::EdgeDot { .. } => "edge_dot".into(),
            Op::SumRows(_) => "sum_rows".into(),
            Op::SumAll(_) => "sum_all".into(),
            Op::MeanAll(_) => "mean_all".into(),
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
    grad: Option<Matrix>,
}

/// Records a computation for reverse-mode differentiation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn check_segments(op: &'static str, offsets: &[usize], len: usize, allow_empty: bool) -> Result<()> {
    let bad = |reason: &str| AutodiffError::InvalidSegments { op, reason: reason.to_string() };
    if offsets.first() != Some(&0) {
        return Err(bad("offsets must start at 0"));
    }
    if *offsets.last().unwrap() != len {
        return Err(bad("offsets must end at the input length"));
    }
    for (s, w) in offsets.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(bad("offsets must be nondecreasing"));
        }
        if w[1] == w[0] && !allow_empty {
            return Err(AutodiffError::EmptySegment { op, segment: s });
        }
    }
    Ok(())
}

fn check_index(op: &'static str, idx: &[usize], len: usize) -> Result<()> {
    match idx.iter().find(|&&i| i >= len) {
        Some(&index) => Err(AutodiffError::IndexOutOfRange { op, index, len }),
        None => Ok(()),
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

    /// A differentiable input.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push_raw(value, Op::Leaf, true)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push_raw(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Accumulated gradient of a leaf, if `backward` has reached it.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push_raw(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Matrix, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op: op.name() });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push_raw(value, op, requires_grad))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(AutodiffError::ShapeMismatch { op: "matmul", lhs: sa, rhs: sb });
        }
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b), &[a, b])
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.1 {
            return Err(AutodiffError::ShapeMismatch { op: "matmul_nt", lhs: sa, rhs: sb });
        }
        let v = self.value(a).matmul_nt(self.value(b));
        self.push(v, Op::MatMulNt(a, b), &[a, b])
    }

    fn binary(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<(Matrix, Broadcast)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let bc = Broadcast::resolve(op, sa, sb)?;
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = Matrix::zeros(sa.0, sa.1);
        for r in 0..sa.0 {
            for c in 0..sa.1 {
                out.set(r, c, f(va.get(r, c), bc.at(vb, r, c)));
            }
        }
        Ok((out, bc))
    }

    /// Elementwise sum. `b` may also be `n×1`, `1×m` or `1×1` and is broadcast.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (v, bc) = self.binary("add", a, b, |x, y| x + y)?;
        self.push(v, Op::Add(a, b, bc), &[a, b])
    }

    /// `a - b`, recorded as `a + (-1)·b`.
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.scale(b, -1.0)?;
        self.add(a, nb)
    }

    /// Elementwise product with the same broadcasting rules as [`Tape::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (v, bc) = self.binary("mul", a, b, |x, y| x * y)?;
        self.push(v, Op::Mul(a, b, bc), &[a, b])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x * s);
        self.push(v, Op::Scale(a, s), &[a])
    }

    pub fn activate(&mut self, a: Var, kind: Activation) -> Result<Var> {
        let v = self.value(a).map(|x| kind.apply(x));
        self.push(v, Op::Activate(a, kind), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(f64::exp);
        self.push(v, Op::Exp(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(f64::ln);
        self.push(v, Op::Log(a), &[a])
    }

    /// Scales every row to unit L2 norm. All-zero rows stay zero.
    pub fn l2_normalize_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let mut out = x.clone();
        for r in 0..x.rows() {
            let n = crate::matrix::norm(x.row(r));
            if n > 0.0 {
                out.row_mut(r).iter_mut().for_each(|v| *v /= n);
            }
        }
        self.push(out, Op::L2NormalizeRows(a), &[a])
    }

    /// Concatenates each row of the inputs side by side: `[x_i ‖ y_i ‖ …]`.
    pub fn row_concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(AutodiffError::NoInputs { op: "row_concat" })?;
        let rows = self.shape(first).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(AutodiffError::ShapeMismatch { op: "row_concat", lhs: self.shape(first), rhs: self.shape(p) });
            }
        }
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Matrix::hconcat(&mats);
        self.push(v, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Stacks inputs vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(AutodiffError::NoInputs { op: "concat_rows" })?;
        let cols = self.shape(first).1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            if self.shape(p).1 != cols {
                return Err(AutodiffError::ShapeMismatch { op: "concat_rows", lhs: self.shape(first), rhs: self.shape(p) });
            }
            rows += self.shape(p).0;
            data.extend_from_slice(self.value(p).as_slice());
        }
        self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()), parts)
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        check_index("gather_rows", idx, self.shape(a).0)?;
        let v = self.value(a).select_rows(idx);
        self.push(v, Op::GatherRows(a, idx.to_vec()), &[a])
    }

    /// Row `s` of the output is the mean of the rows of `x` listed in
    /// `members[offsets[s]..offsets[s+1]]`; an empty list gives a zero row.
    pub fn masked_mean_rows(&mut self, x: Var, offsets: &[usize], members: &[usize]) -> Result<Var> {
        check_segments("masked_mean_rows", offsets, members.len(), true)?;
        let xv = self.value(x);
        check_index("masked_mean_rows", members, xv.rows())?;
        let mut out = Matrix::zeros(offsets.len() - 1, xv.cols());
        for s in 0..offsets.len() - 1 {
            let list = &members[offsets[s]..offsets[s + 1]];
            if list.is_empty() {
                continue;
            }
            let inv = 1.0 / list.len() as f64;
            let row = out.row_mut(s);
            for &j in list {
                for (o, v) in row.iter_mut().zip(xv.row(j)) {
                    *o += v * inv;
                }
            }
        }
        self.push(out, Op::MaskedMeanRows { x, offsets: offsets.to_vec(), members: members.to_vec() }, &[x])
    }

    /// Softmax of an `E×1` column computed independently within each segment
    /// `[offsets[s], offsets[s+1])`. Every segment must be nonempty.
    pub fn segment_softmax(&mut self, logits: Var, offsets: &[usize]) -> Result<Var> {
        let (rows, cols) = self.shape(logits);
        if cols != 1 {
            return Err(AutodiffError::ShapeMismatch { op: "segment_softmax", lhs: (rows, cols), rhs: (rows, 1) });
        }
        check_segments("segment_softmax", offsets, rows, false)?;
        let x = self.value(logits).as_slice();
        let mut out = vec![0.0; rows];
        for w in offsets.windows(2) {
            let seg = &x[w[0]..w[1]];
            let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (o, &v) in out[w[0]..w[1]].iter_mut().zip(seg) {
                *o = (v - max).exp();
                total += *o;
            }
            out[w[0]..w[1]].iter_mut().for_each(|o| *o /= total);
        }
        self.push(Matrix::column(&out), Op::SegmentSoftmax(logits, offsets.to_vec()), &[logits])
    }

    /// Row `s` of the output is `Σ_e weights[e] · values[index[e]]` over the
    /// entries `e` of segment `s`. Empty segments give zero rows.
    pub fn segment_weighted_sum(&mut self, weights: Var, values: Var, index: &[usize], offsets: &[usize]) -> Result<Var> {
        let ws = self.shape(weights);
        if ws != (index.len(), 1) {
            return Err(AutodiffError::ShapeMismatch { op: "segment_weighted_sum", lhs: ws, rhs: (index.len(), 1) });
        }
        check_segments("segment_weighted_sum", offsets, index.len(), true)?;
        let vv = self.value(values);
        check_index("segment_weighted_sum", index, vv.rows())?;
        let w = self.value(weights).as_slice();
        let mut out = Matrix::zeros(offsets.len() - 1, vv.cols());
        for s in 0..offsets.len() - 1 {
            let row = out.row_mut(s);
            for e in offsets[s]..offsets[s + 1] {
                for (o, v) in row.iter_mut().zip(vv.row(index[e])) {
                    *o += w[e] * v;
                }
            }
        }
        let op = Op::SegmentWeightedSum { weights, values, index: index.to_vec(), offsets: offsets.to_vec() };
        self.push(out, op, &[weights, values])
    }

    /// `E×1` column of row dot products `a[src[e]] · b[dst[e]]`.
    pub fn edge_dot(&mut self, a: Var, b: Var, src: &[usize], dst: &[usize]) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.1 || src.len() != dst.len() {
            return Err(AutodiffError::ShapeMismatch { op: "edge_dot", lhs: sa, rhs: sb });
        }
        check_index("edge_dot", src, sa.0)?;
        check_index("edge_dot", dst, sb.0)?;
        let (va, vb) = (self.value(a), self.value(b));
        let out: Vec<f64> = src.iter().zip(dst).map(|(&i, &j)| dot(va.row(i), vb.row(j))).collect();
        let op = Op::EdgeDot { a, b, src: src.to_vec(), dst: dst.to_vec() };
        self.push(Matrix::column(&out), op, &[a, b])
    }

    /// `n×m → n×1` row sums.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let v: Vec<f64> = x.row_iter().map(|r| r.iter().sum()).collect();
        self.push(Matrix::column(&v), Op::SumRows(a), &[a])
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let v = Matrix::scalar(self.value(a).sum());
        self.push(v, Op::SumAll(a), &[a])
    }

    pub fn mean_all(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(AutodiffError::NoInputs { op: "mean_all" });
        }
        let v = Matrix::scalar(x.sum() / x.len() as f64);
        self.push(v, Op::MeanAll(a), &[a])
    }

    /// Index and op name of the first recorded value holding NaN/Inf.
    pub fn first_non_finite(&self) -> Option<(usize, String)> {
        self.nodes.iter().enumerate().find(|(_, n)| !n.value.is_finite()).map(|(i, n)| (i, n.op.name()))
    }

    /// Propagates `∂output/∂·` to every differentiable leaf.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        let (rows, cols) = self.shape(output);
        if (rows, cols) != (1, 1) {
            return Err(AutodiffError::NonScalar { rows, cols });
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; output.0 + 1];
        adj[output.0] = Some(Matrix::scalar(1.0));
        for i in (0..=output.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            if !g.is_finite() {
                return Err(AutodiffError::NonFinite { op: format!("backward of {}", self.nodes[i].op.name()) });
            }
            if let Op::Leaf = self.nodes[i].op {
                let node = &mut self.nodes[i];
                match &mut node.grad {
                    Some(acc) => acc.add_assign(&g),
                    None => node.grad = Some(g),
                }
                continue;
            }
            for (input, contribution) in self.local_grads(i, &g) {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut adj[input.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot @ None => *slot = Some(contribution),
                }
            }
        }
        Ok(())
    }

    fn local_grads(&self, i: usize, g: &Matrix) -> Vec<(Var, Matrix)> {
        let node = &self.nodes[i];
        let y = &node.value;
        let val = |v: Var| &self.nodes[v.0].value;
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let mut out = Vec::with_capacity(2);
                if needs(*a) {
                    out.push((*a, g.matmul_nt(val(*b))));
                }
                if needs(*b) {
                    out.push((*b, val(*a).matmul_tn(g)));
                }
                out
            }
            Op::MatMulNt(a, b) => {
                let mut out = Vec::with_capacity(2);
                if needs(*a) {
                    out.push((*a, g.matmul(val(*b))));
                }
                if needs(*b) {
                    out.push((*b, g.matmul_tn(val(*a))));
                }
                out
            }
            Op::Add(a, b, bc) => {
                let mut out = vec![(*a, g.clone())];
                if needs(*b) {
                    out.push((*b, bc.reduce(g.clone(), val(*b).shape())));
                }
                out
            }
            Op::Mul(a, b, bc) => {
                let (va, vb) = (val(*a), val(*b));
                let mut out = Vec::with_capacity(2);
                if needs(*a) {
                    let mut ga = g.clone();
                    for r in 0..g.rows() {
                        for c in 0..g.cols() {
                            ga.set(r, c, g.get(r, c) * bc.at(vb, r, c));
                        }
                    }
                    out.push((*a, ga));
                }
                if needs(*b) {
                    let mut gb = g.clone();
                    for (o, x) in gb.as_mut_slice().iter_mut().zip(va.as_slice()) {
                        *o *= x;
                    }
                    out.push((*b, bc.reduce(gb, vb.shape())));
                }
                out
            }
            Op::Scale(a, s) => vec![(*a, g.map(|v| v * s))],
            Op::Activate(a, kind) => {
                let x = val(*a);
                let mut ga = g.clone();
                for ((o, &xv), &yv) in ga.as_mut_slice().iter_mut().zip(x.as_slice()).zip(y.as_slice()) {
                    *o *= kind.derivative(xv, yv);
                }
                vec![(*a, ga)]
            }
            Op::Exp(a) => {
                let mut ga = g.clone();
                for (o, &yv) in ga.as_mut_slice().iter_mut().zip(y.as_slice()) {
                    *o *= yv;
                }
                vec![(*a, ga)]
            }
            Op::Log(a) => {
                let mut ga = g.clone();
                for (o, &xv) in ga.as_mut_slice().iter_mut().zip(val(*a).as_slice()) {
                    *o /= xv;
                }
                vec![(*a, ga)]
            }
            Op::L2NormalizeRows(a) => {
                let x = val(*a);
                let mut ga = Matrix::zeros(x.rows(), x.cols());
                for r in 0..x.rows() {
                    let n = crate::matrix::norm(x.row(r));
                    if n == 0.0 {
                        continue;
                    }
                    let (yr, gr) = (y.row(r), g.row(r));
                    let proj = dot(yr, gr);
                    for ((o, &yv), &gv) in ga.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *o = (gv - yv * proj) / n;
                    }
                }
                vec![(*a, ga)]
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                let mut out = Vec::with_capacity(parts.len());
                for &p in parts {
                    let w = val(p).cols();
                    let mut gp = Matrix::zeros(g.rows(), w);
                    for r in 0..g.rows() {
                        gp.row_mut(r).copy_from_slice(&g.row(r)[off..off + w]);
                    }
                    off += w;
                    out.push((p, gp));
                }
                out
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                let mut out = Vec::with_capacity(parts.len());
                for &p in parts {
                    let (h, w) = val(p).shape();
                    let gp = Matrix::from_vec(h, w, g.as_slice()[off * w..(off + h) * w].to_vec());
                    off += h;
                    out.push((p, gp));
                }
                out
            }
            Op::GatherRows(a, idx) => {
                let x = val(*a);
                let mut ga = Matrix::zeros(x.rows(), x.cols());
                for (e, &src) in idx.iter().enumerate() {
                    for (o, v) in ga.row_mut(src).iter_mut().zip(g.row(e)) {
                        *o += v;
                    }
                }
                vec![(*a, ga)]
            }
            Op::MaskedMeanRows { x, offsets, members } => {
                let xv = val(*x);
                let mut gx = Matrix::zeros(xv.rows(), xv.cols());
                for s in 0..offsets.len() - 1 {
                    let list = &members[offsets[s]..offsets[s + 1]];
                    if list.is_empty() {
                        continue;
                    }
                    let inv = 1.0 / list.len() as f64;
                    for &j in list {
                        for (o, v) in gx.row_mut(j).iter_mut().zip(g.row(s)) {
                            *o += v * inv;
                        }
                    }
                }
                vec![(*x, gx)]
            }
            Op::SegmentSoftmax(a, offsets) => {
                let ys = y.as_slice();
                let gs = g.as_slice();
                let mut ga = vec![0.0; ys.len()];
                for w in offsets.windows(2) {
                    let inner: f64 = (w[0]..w[1]).map(|e| ys[e] * gs[e]).sum();
                    for e in w[0]..w[1] {
                        ga[e] = ys[e] * (gs[e] - inner);
                    }
                }
                vec![(*a, Matrix::column(&ga))]
            }
            Op::SegmentWeightedSum { weights, values, index, offsets } => {
                let (wv, vv) = (val(*weights).as_slice(), val(*values));
                let mut out = Vec::with_capacity(2);
                if needs(*weights) {
                    let mut gw = vec![0.0; index.len()];
                    for s in 0..offsets.len() - 1 {
                        for e in offsets[s]..offsets[s + 1] {
                            gw[e] = dot(g.row(s), vv.row(index[e]));
                        }
                    }
                    out.push((*weights, Matrix::column(&gw)));
                }
                if needs(*values) {
                    let mut gv = Matrix::zeros(vv.rows(), vv.cols());
                    for s in 0..offsets.len() - 1 {
                        for e in offsets[s]..offsets[s + 1] {
                            for (o, v) in gv.row_mut(index[e]).iter_mut().zip(g.row(s)) {
                                *o += wv[e] * v;
                            }
                        }
                    }
                    out.push((*values, gv));
                }
                out
            }
            Op::EdgeDot { a, b, src, dst } => {
                let (va, vb) = (val(*a), val(*b));
                let gs = g.as_slice();
                let mut out = Vec::with_capacity(2);
                if needs(*a) {
                    let mut ga = Matrix::zeros(va.rows(), va.cols());
                    for (e, (&i, &j)) in src.iter().zip(dst).enumerate() {
                        for (o, v) in ga.row_mut(i).iter_mut().zip(vb.row(j)) {
                            *o += gs[e] * v;
                        }
                    }
                    out.push((*a, ga));
                }
                if needs(*b) {
                    let mut gb = Matrix::zeros(vb.rows(), vb.cols());
                    for (e, (&i, &j)) in src.iter().zip(dst).enumerate() {
                        for (o, v) in gb.row_mut(j).iter_mut().zip(va.row(i)) {
                            *o += gs[e] * v;
                        }
                    }
                    out.push((*b, gb));
                }
                out
            }
            Op::SumRows(a) => {
                let (r, c) = val(*a).shape();
                let mut ga = Matrix::zeros(r, c);
                for i in 0..r {
                    let gi = g.get(i, 0);
                    ga.row_mut(i).iter_mut().for_each(|o| *o = gi);
                }
                vec![(*a, ga)]
            }
            Op::SumAll(a) => {
                let (r, c) = val(*a).shape();
                vec![(*a, Matrix::filled(r, c, g.get(0, 0)))]
            }
            Op::MeanAll(a) => {
                let (r, c) = val(*a).shape();
                vec![(*a, Matrix::filled(r, c, g.get(0, 0) / (r * c) as f64))]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_softmax_uniform_on_equal_logits() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::column(&[0.0, 0.0, 0.0]));
        let y = t.segment_softmax(x, &[0, 3]).unwrap();
        for &v in t.value(y).as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn segment_softmax_rejects_empty_segment() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::column(&[1.0, 2.0]));
        let err = t.segment_softmax(x, &[0, 0, 2]).unwrap_err();
        assert_eq!(err, AutodiffError::EmptySegment { op: "segment_softmax", segment: 0 });
    }

    #[test]
    fn l2_normalize_three_four_five() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::from_rows(&[[3.0, 4.0]]));
        let y = t.l2_normalize_rows(x).unwrap();
        assert_eq!(t.value(y).as_slice(), &[0.6, 0.8]);
    }

    #[test]
    fn matmul_identity() {
        let mut t = Tape::new();
        let i = t.constant(Matrix::identity(3));
        let xm = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0], [7.0, 0.0]]);
        let x = t.constant(xm.clone());
        let y = t.matmul(i, x).unwrap();
        assert_eq!(t.value(y), &xm);
    }

    #[test]
    fn matmul_shape_error() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(2, 3));
        let b = t.constant(Matrix::zeros(2, 3));
        assert!(matches!(t.matmul(a, b), Err(AutodiffError::ShapeMismatch { op: "matmul", .. })));
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::from_rows(&[[1.0, 2.0, 3.0]]));
        let sq = t.mul(x, x).unwrap();
        let s = t.sum_all(sq).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap().as_slice(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn log_sum_exp_gradient_is_softmax() {
        let xs = [0.3, -1.2, 2.0, 0.0];
        let mut t = Tape::new();
        let x = t.leaf(Matrix::column(&xs));
        let e = t.exp(x).unwrap();
        let s = t.sum_all(e).unwrap();
        let l = t.log(s).unwrap();
        t.backward(l).unwrap();
        let z: f64 = xs.iter().map(|v| v.exp()).sum();
        for (g, v) in t.grad(x).unwrap().as_slice().iter().zip(xs) {
            assert!((g - v.exp() / z).abs() < 1e-14);
        }
    }

    #[test]
    fn backward_accumulates_until_zeroed() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::scalar(3.0));
        let y = t.scale(x, 2.0).unwrap();
        t.backward(y).unwrap();
        t.backward(y).unwrap();
        assert_eq!(t.grad(x).unwrap().get(0, 0), 4.0);
        t.zero_grad();
        t.backward(y).unwrap();
        assert_eq!(t.grad(x).unwrap().get(0, 0), 2.0);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::zeros(2, 1));
        assert_eq!(t.backward(x), Err(AutodiffError::NonScalar { rows: 2, cols: 1 }));
    }

    #[test]
    fn non_finite_results_name_the_op() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::scalar(0.0));
        assert_eq!(t.log(x), Err(AutodiffError::NonFinite { op: "log".into() }));
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::scalar(1.5));
        let c = t.constant(Matrix::scalar(4.0));
        let y = t.mul(x, c).unwrap();
        t.backward(y).unwrap();
        assert_eq!(t.grad(x).unwrap().get(0, 0), 4.0);
        assert!(t.grad(c).is_none());
    }

    #[test]
    fn broadcast_add_column_and_row() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::zeros(2, 3));
        let col = t.leaf(Matrix::column(&[1.0, 2.0]));
        let row = t.leaf(Matrix::from_rows(&[[10.0, 20.0, 30.0]]));
        let s = t.add(a, col).unwrap();
        let s = t.add(s, row).unwrap();
        assert_eq!(t.value(s).row(1), &[12.0, 22.0, 32.0]);
        let total = t.sum_all(s).unwrap();
        t.backward(total).unwrap();
        assert_eq!(t.grad(col).unwrap().as_slice(), &[3.0, 3.0]);
        assert_eq!(t.grad(row).unwrap().as_slice(), &[2.0, 2.0, 2.0]);
    }
}
