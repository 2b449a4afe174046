//! Reverse-mode automatic differentiation over dense 2-D `f64` matrices.
//!
//! A [`Tape`] records every operation; [`Tensor`] is a cheap handle into it.
//! Binary arithmetic broadcasts a `1 x c`, `r x 1` or `1 x 1` operand against
//! an `r x c` one. Gradients accumulate across `backward` calls until
//! [`Tape::zero_grad`].

use std::cell::RefCell;
use std::ops;

use ndarray::{s, Array2, Axis};

use super::{NeuralError, Result};

pub type Mat = Array2<f64>;

#[derive(Debug, Clone, Copy)]
enum Unary {
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu(f64),
    Elu(f64),
    Exp,
    Ln,
    Softplus,
    /// `x^(-1/2)` for `x > 0`, zero otherwise.
    RsqrtSafe,
    Square,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    MatMul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Unary(usize, Unary),
    Sum(usize),
    SumRows(usize),
    SumCols(usize),
    Transpose(usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    SliceCols(usize, usize),
    GatherRows(usize, Vec<usize>),
    ScatterAddRows(usize, Vec<usize>),
    /// Winning input row per output cell, `usize::MAX` for empty segments.
    ScatterMaxRows(usize, Array2<usize>),
    SegmentSoftmax(usize, Vec<usize>),
    SoftmaxRows(usize),
}

struct Node {
    value: Mat,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    grads: RefCell<Vec<Option<Mat>>>,
}

#[derive(Clone, Copy)]
pub struct Tensor<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Tensor<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tensor#{}{:?}", self.id, self.shape())
    }
}

fn reduce_to(mut g: Mat, shape: (usize, usize)) -> Mat {
    if shape.0 == 1 && g.nrows() != 1 {
        g = g.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if shape.1 == 1 && g.ncols() != 1 {
        g = g.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    g
}

fn broadcast_shape(a: (usize, usize), b: (usize, usize)) -> (usize, usize) {
    let dim = |x: usize, y: usize| {
        if x == y || y == 1 {
            x
        } else if x == 1 {
            y
        } else {
            panic!("cannot broadcast {a:?} with {b:?}")
        }
    };
    (dim(a.0, b.0), dim(a.1, b.1))
}

fn binary(a: &Mat, b: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
    let shape = broadcast_shape(a.dim(), b.dim());
    let a = a.broadcast(shape).expect("broadcastable");
    let b = b.broadcast(shape).expect("broadcastable");
    ndarray::Zip::from(&a).and(&b).map_collect(|&x, &y| f(x, y))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

impl Unary {
    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Sigmoid => sigmoid(x),
            Unary::Tanh => x.tanh(),
            Unary::Relu => x.max(0.0),
            Unary::LeakyRelu(a) => if x > 0.0 { x } else { a * x },
            Unary::Elu(a) => if x > 0.0 { x } else { a * x.exp_m1() },
            Unary::Exp => x.exp(),
            Unary::Ln => x.ln(),
            Unary::Softplus => softplus(x),
            Unary::RsqrtSafe => if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 },
            Unary::Square => x * x,
        }
    }

    /// d output / d input given input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Sigmoid => y * (1.0 - y),
            Unary::Tanh => 1.0 - y * y,
            Unary::Relu => if x > 0.0 { 1.0 } else { 0.0 },
            Unary::LeakyRelu(a) => if x > 0.0 { 1.0 } else { a },
            Unary::Elu(a) => if x > 0.0 { 1.0 } else { y + a },
            Unary::Exp => y,
            Unary::Ln => 1.0 / x,
            Unary::Softplus => sigmoid(x),
            Unary::RsqrtSafe => if x > 0.0 { -0.5 * y * y * y } else { 0.0 },
            Unary::Square => 2.0 * x,
        }
    }
}

fn softmax_segments(x: &Mat, seg: &[usize], n_seg: usize) -> Mat {
    let c = x.ncols();
    let mut max = Array2::from_elem((n_seg, c), f64::NEG_INFINITY);
    for (r, &s) in seg.iter().enumerate() {
        for j in 0..c {
            max[[s, j]] = max[[s, j]].max(x[[r, j]]);
        }
    }
    let mut y = Array2::zeros(x.dim());
    let mut sum = Array2::<f64>::zeros((n_seg, c));
    for (r, &s) in seg.iter().enumerate() {
        for j in 0..c {
            let e = (x[[r, j]] - max[[s, j]]).exp();
            y[[r, j]] = e;
            sum[[s, j]] += e;
        }
    }
    for (r, &s) in seg.iter().enumerate() {
        for j in 0..c {
            y[[r, j]] /= sum[[s, j]];
        }
    }
    y
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Mat, op: Op, requires_grad: bool) -> Tensor<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.borrow_mut().push(None);
        Tensor {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Differentiable leaf.
    pub fn var(&self, value: Mat) -> Tensor<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: Mat) -> Tensor<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar(&self, v: f64) -> Tensor<'_> {
        self.constant(Array2::from_elem((1, 1), v))
    }

    pub fn zero_grad(&self) {
        for g in self.grads.borrow_mut().iter_mut() {
            *g = None;
        }
    }

    pub fn grad(&self, t: Tensor<'_>) -> Option<Mat> {
        self.grads.borrow()[t.id].clone()
    }

    /// Accumulates d loss / d node into every node reachable from `loss`.
    pub fn backward(&self, loss: Tensor<'_>) -> Result<()> {
        let nodes = self.nodes.borrow();
        let shape = nodes[loss.id].value.dim();
        if shape != (1, 1) {
            return Err(NeuralError::NonScalarLoss(shape.0, shape.1));
        }
        // local adjoints for this pass; leaves flush into the persistent store
        let mut adj: Vec<Option<Mat>> = vec![None; loss.id + 1];
        adj[loss.id] = Some(Array2::ones((1, 1)));
        let mut store = self.grads.borrow_mut();
        for id in (0..=loss.id).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let mut send = |i: usize, gi: Mat| {
                if !nodes[i].requires_grad {
                    return;
                }
                match &mut adj[i] {
                    Some(acc) => *acc += &gi,
                    slot => *slot = Some(gi),
                }
            };
            let val = |i: usize| &nodes[i].value;
            match &node.op {
                Op::Leaf => {
                    match &mut store[id] {
                        Some(acc) => *acc += &g,
                        slot => *slot = Some(g),
                    }
                }
                &Op::Add(a, b) => {
                    send(a, reduce_to(g.clone(), val(a).dim()));
                    send(b, reduce_to(g, val(b).dim()));
                }
                &Op::Sub(a, b) => {
                    send(a, reduce_to(g.clone(), val(a).dim()));
                    send(b, reduce_to(-g, val(b).dim()));
                }
                &Op::Mul(a, b) => {
                    send(a, reduce_to(binary(&g, val(b), |x, y| x * y), val(a).dim()));
                    send(b, reduce_to(binary(&g, val(a), |x, y| x * y), val(b).dim()));
                }
                &Op::Div(a, b) => {
                    send(a, reduce_to(binary(&g, val(b), |x, y| x / y), val(a).dim()));
                    let gy = binary(&binary(&g, val(a), |x, y| x * y), val(b), |x, y| -x / (y * y));
                    send(b, reduce_to(gy, val(b).dim()));
                }
                &Op::MatMul(a, b) => {
                    send(a, g.dot(&val(b).t()));
                    send(b, val(a).t().dot(&g));
                }
                &Op::Scale(a, k) => send(a, g * k),
                &Op::AddScalar(a) => send(a, g),
                &Op::Unary(a, f) => {
                    let x = val(a);
                    let y = &node.value;
                    let mut gx = g;
                    ndarray::Zip::from(&mut gx)
                        .and(x)
                        .and(y)
                        .for_each(|gv, &xv, &yv| *gv *= f.derivative(xv, yv));
                    send(a, gx);
                }
                &Op::Sum(a) => send(a, Array2::from_elem(val(a).dim(), g[[0, 0]])),
                &Op::SumRows(a) => {
                    let shape = val(a).dim();
                    send(a, g.broadcast(shape).expect("row sum").to_owned());
                }
                &Op::SumCols(a) => {
                    let shape = val(a).dim();
                    send(a, g.broadcast(shape).expect("col sum").to_owned());
                }
                &Op::Transpose(a) => send(a, g.t().to_owned()),
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let w = val(p).ncols();
                        send(p, g.slice(s![.., at..at + w]).to_owned());
                        at += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let h = val(p).nrows();
                        send(p, g.slice(s![at..at + h, ..]).to_owned());
                        at += h;
                    }
                }
                &Op::SliceCols(a, start) => {
                    let mut gx = Array2::zeros(val(a).dim());
                    gx.slice_mut(s![.., start..start + g.ncols()]).assign(&g);
                    send(a, gx);
                }
                Op::GatherRows(a, idx) => {
                    let mut gx = Array2::zeros(val(*a).dim());
                    for (r, &i) in idx.iter().enumerate() {
                        let mut row = gx.row_mut(i);
                        row += &g.row(r);
                    }
                    send(*a, gx);
                }
                Op::ScatterAddRows(a, idx) => {
                    send(*a, g.select(Axis(0), idx));
                }
                Op::ScatterMaxRows(a, arg) => {
                    let mut gx = Array2::zeros(val(*a).dim());
                    for ((r, c), &i) in arg.indexed_iter() {
                        if i != usize::MAX {
                            gx[[i, c]] += g[[r, c]];
                        }
                    }
                    send(*a, gx);
                }
                Op::SegmentSoftmax(a, seg) => {
                    let y = &node.value;
                    let c = y.ncols();
                    let n_seg = seg.iter().max().map_or(0, |m| m + 1);
                    let mut dot = Array2::<f64>::zeros((n_seg, c));
                    for (r, &sg) in seg.iter().enumerate() {
                        for j in 0..c {
                            dot[[sg, j]] += g[[r, j]] * y[[r, j]];
                        }
                    }
                    let mut gx = Array2::zeros(y.dim());
                    for (r, &sg) in seg.iter().enumerate() {
                        for j in 0..c {
                            gx[[r, j]] = y[[r, j]] * (g[[r, j]] - dot[[sg, j]]);
                        }
                    }
                    send(*a, gx);
                }
                &Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let dot = (&g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                    send(a, y * &(&g - &dot));
                }
            }
        }
        Ok(())
    }
}

impl<'t> Tensor<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Mat {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    pub fn item(&self) -> f64 {
        self.tape.nodes.borrow()[self.id].value[[0, 0]]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.nodes.borrow()[self.id].value.dim()
    }

    pub fn grad(&self) -> Option<Mat> {
        self.tape.grad(*self)
    }

    fn requires(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    fn unary_map(self, f: impl Fn(&Mat) -> Mat, op: Op) -> Tensor<'t> {
        let v = f(&self.tape.nodes.borrow()[self.id].value);
        self.tape.push(v, op, self.requires())
    }

    fn binary_op(self, other: Tensor<'t>, f: impl Fn(f64, f64) -> f64, op: Op) -> Tensor<'t> {
        let v = {
            let nodes = self.tape.nodes.borrow();
            binary(&nodes[self.id].value, &nodes[other.id].value, f)
        };
        self.tape.push(v, op, self.requires() || other.requires())
    }

    pub fn matmul(self, other: Tensor<'t>) -> Tensor<'t> {
        let v = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
            assert_eq!(a.ncols(), b.nrows(), "matmul {:?} x {:?}", a.dim(), b.dim());
            a.dot(b)
        };
        self.tape
            .push(v, Op::MatMul(self.id, other.id), self.requires() || other.requires())
    }

    pub fn scale(self, k: f64) -> Tensor<'t> {
        self.unary_map(|a| a * k, Op::Scale(self.id, k))
    }

    pub fn add_scalar(self, k: f64) -> Tensor<'t> {
        self.unary_map(|a| a + k, Op::AddScalar(self.id))
    }

    fn unary(self, f: Unary) -> Tensor<'t> {
        self.unary_map(|a| a.mapv(|x| f.apply(x)), Op::Unary(self.id, f))
    }

    pub fn sigmoid(self) -> Tensor<'t> {
        self.unary(Unary::Sigmoid)
    }
    pub fn tanh(self) -> Tensor<'t> {
        self.unary(Unary::Tanh)
    }
    pub fn relu(self) -> Tensor<'t> {
        self.unary(Unary::Relu)
    }
    pub fn leaky_relu(self, slope: f64) -> Tensor<'t> {
        self.unary(Unary::LeakyRelu(slope))
    }
    pub fn elu(self, alpha: f64) -> Tensor<'t> {
        self.unary(Unary::Elu(alpha))
    }
    pub fn exp(self) -> Tensor<'t> {
        self.unary(Unary::Exp)
    }
    pub fn ln(self) -> Tensor<'t> {
        self.unary(Unary::Ln)
    }
    pub fn softplus(self) -> Tensor<'t> {
        self.unary(Unary::Softplus)
    }
    pub fn rsqrt_safe(self) -> Tensor<'t> {
        self.unary(Unary::RsqrtSafe)
    }
    pub fn square(self) -> Tensor<'t> {
        self.unary(Unary::Square)
    }

    /// Sum of all entries, `1 x 1`.
    pub fn sum(self) -> Tensor<'t> {
        self.unary_map(|a| Array2::from_elem((1, 1), a.sum()), Op::Sum(self.id))
    }

    pub fn mean(self) -> Tensor<'t> {
        let (r, c) = self.shape();
        self.sum().scale(1.0 / (r * c).max(1) as f64)
    }

    /// Column sums, `1 x c`.
    pub fn sum_rows(self) -> Tensor<'t> {
        self.unary_map(
            |a| a.sum_axis(Axis(0)).insert_axis(Axis(0)),
            Op::SumRows(self.id),
        )
    }

    /// Row sums, `r x 1`.
    pub fn sum_cols(self) -> Tensor<'t> {
        self.unary_map(
            |a| a.sum_axis(Axis(1)).insert_axis(Axis(1)),
            Op::SumCols(self.id),
        )
    }

    pub fn mean_rows(self) -> Tensor<'t> {
        let r = self.shape().0.max(1);
        self.sum_rows().scale(1.0 / r as f64)
    }

    pub fn t(self) -> Tensor<'t> {
        self.unary_map(|a| a.t().to_owned(), Op::Transpose(self.id))
    }

    pub fn slice_cols(self, start: usize, len: usize) -> Tensor<'t> {
        self.unary_map(
            |a| a.slice(s![.., start..start + len]).to_owned(),
            Op::SliceCols(self.id, start),
        )
    }

    pub fn gather_rows(self, idx: &[usize]) -> Tensor<'t> {
        self.unary_map(
            |a| a.select(Axis(0), idx),
            Op::GatherRows(self.id, idx.to_vec()),
        )
    }

    /// Row `r` of `self` is added into output row `idx[r]`; output has `n` rows.
    pub fn scatter_add_rows(self, idx: &[usize], n: usize) -> Tensor<'t> {
        self.unary_map(
            |a| {
                let mut out = Array2::zeros((n, a.ncols()));
                for (r, &i) in idx.iter().enumerate() {
                    let mut row = out.row_mut(i);
                    row += &a.row(r);
                }
                out
            },
            Op::ScatterAddRows(self.id, idx.to_vec()),
        )
    }

    /// Column-wise maximum per output row; rows receiving nothing are zero.
    pub fn scatter_max_rows(self, idx: &[usize], n: usize) -> Tensor<'t> {
        let (v, arg) = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.id].value;
            let c = a.ncols();
            let mut out = Array2::zeros((n, c));
            let mut arg = Array2::from_elem((n, c), usize::MAX);
            for (r, &i) in idx.iter().enumerate() {
                for j in 0..c {
                    if arg[[i, j]] == usize::MAX || a[[r, j]] > out[[i, j]] {
                        out[[i, j]] = a[[r, j]];
                        arg[[i, j]] = r;
                    }
                }
            }
            (out, arg)
        };
        self.tape
            .push(v, Op::ScatterMaxRows(self.id, arg), self.requires())
    }

    /// Softmax within groups of rows sharing a segment id, per column.
    pub fn segment_softmax(self, seg: &[usize]) -> Tensor<'t> {
        let n_seg = seg.iter().max().map_or(0, |m| m + 1);
        self.unary_map(
            |a| softmax_segments(a, seg, n_seg),
            Op::SegmentSoftmax(self.id, seg.to_vec()),
        )
    }

    pub fn softmax_rows(self) -> Tensor<'t> {
        self.unary_map(
            |a| {
                let mut y = a.clone();
                for mut row in y.rows_mut() {
                    let m = row.fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
                    row.mapv_inplace(|x| (x - m).exp());
                    let s = row.sum();
                    row.mapv_inplace(|x| x / s);
                }
                y
            },
            Op::SoftmaxRows(self.id),
        )
    }
}

/// Horizontal concatenation.
pub fn concat_cols<'t>(parts: &[Tensor<'t>]) -> Tensor<'t> {
    let tape = parts[0].tape;
    let (v, req) = {
        let nodes = tape.nodes.borrow();
        let views: Vec<_> = parts.iter().map(|p| nodes[p.id].value.view()).collect();
        (
            ndarray::concatenate(Axis(1), &views).expect("equal row counts"),
            parts.iter().any(|p| nodes[p.id].requires_grad),
        )
    };
    tape.push(v, Op::ConcatCols(parts.iter().map(|p| p.id).collect()), req)
}

/// Vertical concatenation.
pub fn concat_rows<'t>(parts: &[Tensor<'t>]) -> Tensor<'t> {
    let tape = parts[0].tape;
    let (v, req) = {
        let nodes = tape.nodes.borrow();
        let views: Vec<_> = parts.iter().map(|p| nodes[p.id].value.view()).collect();
        (
            ndarray::concatenate(Axis(0), &views).expect("equal column counts"),
            parts.iter().any(|p| nodes[p.id].requires_grad),
        )
    };
    tape.push(v, Op::ConcatRows(parts.iter().map(|p| p.id).collect()), req)
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:ident, $f:expr) => {
        impl<'t> ops::$trait for Tensor<'t> {
            type Output = Tensor<'t>;
            fn $method(self, rhs: Tensor<'t>) -> Tensor<'t> {
                self.binary_op(rhs, $f, Op::$op(self.id, rhs.id))
            }
        }
    };
}

binop!(Add, add, Add, |x, y| x + y);
binop!(Sub, sub, Sub, |x, y| x - y);
binop!(Mul, mul, Mul, |x, y| x * y);
binop!(Div, div, Div, |x, y| x / y);

impl<'t> ops::Neg for Tensor<'t> {
    type Output = Tensor<'t>;
    fn neg(self) -> Tensor<'t> {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn square_sum_gradient() {
        let tape = Tape::new();
        let x = tape.var(array![[1.0, 2.0]]);
        let loss = (x * x).sum();
        tape.backward(loss).unwrap();
        assert_eq!(x.grad().unwrap(), array![[2.0, 4.0]]);
        // a second pass accumulates
        tape.backward(loss).unwrap();
        assert_eq!(x.grad().unwrap(), array![[4.0, 8.0]]);
        tape.zero_grad();
        assert!(x.grad().is_none());
    }

    #[test]
    fn unused_parameter_has_no_gradient() {
        let tape = Tape::new();
        let x = tape.var(array![[3.0]]);
        let p = tape.var(array![[5.0]]);
        let loss = x.square().sum();
        tape.backward(loss).unwrap();
        assert!(p.grad().unwrap_or_else(|| Array2::zeros((1, 1))).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let tape = Tape::new();
        let x = tape.var(array![[1.0, 2.0]]);
        assert!(matches!(tape.backward(x), Err(NeuralError::NonScalarLoss(1, 2))));
    }

    #[test]
    fn broadcasting_reduces_gradients() {
        let tape = Tape::new();
        let a = tape.var(Array2::ones((3, 2)));
        let b = tape.var(array![[1.0, 2.0]]);
        let c = tape.var(array![[1.0], [2.0], [3.0]]);
        let loss = ((a + b) * c).sum();
        tape.backward(loss).unwrap();
        assert_eq!(b.grad().unwrap(), array![[6.0, 6.0]]);
        assert_eq!(c.grad().unwrap(), array![[5.0], [5.0], [5.0]]);
    }

    #[test]
    fn segment_softmax_normalizes_groups() {
        let tape = Tape::new();
        let x = tape.var(array![[1.0], [2.0], [3.0], [0.5]]);
        let y = x.segment_softmax(&[0, 0, 1, 1]).value();
        assert!((y[[0, 0]] + y[[1, 0]] - 1.0).abs() < 1e-15);
        assert!((y[[2, 0]] + y[[3, 0]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scatter_max_picks_largest() {
        let tape = Tape::new();
        let x = tape.var(array![[1.0, 5.0], [3.0, 2.0], [7.0, 7.0]]);
        let y = x.scatter_max_rows(&[0, 0, 2], 3);
        assert_eq!(y.value(), array![[3.0, 5.0], [0.0, 0.0], [7.0, 7.0]]);
        tape.backward(y.sum()).unwrap();
        assert_eq!(x.grad().unwrap(), array![[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]);
    }
}
