//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every primitive applied to [`Var`] handles in
//! evaluation order, so the node list is already topologically sorted and
//! [`Tape::backward`] is a single reverse sweep. Binary elementwise ops
//! broadcast a `(1, c)`, `(n, 1)` or `(1, 1)` operand against a full matrix.
//!
//! Primitives never return `Result`. A non-finite forward value is recorded
//! as the tape's fault (first one wins) and surfaced by [`Tape::check`] and
//! [`Tape::backward`]; shape errors panic, as in `ndarray`.

use std::cell::{Cell, Ref, RefCell};
use std::rc::Rc;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::manifold::ARTANH_MAX;

/// A trainable (or frozen) parameter block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub value: Array2<f64>,
    #[serde(skip)]
    pub grad: Option<Array2<f64>>,
    pub requires_grad: bool,
}

impl Tensor {
    pub fn new(value: Array2<f64>) -> Self {
        Self {
            value,
            grad: None,
            requires_grad: true,
        }
    }

    pub fn frozen(value: Array2<f64>) -> Self {
        Self {
            value,
            grad: None,
            requires_grad: false,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Unary {
    Tanh,
    Sigmoid,
    Relu,
    Log,
    Exp,
    Sqrt,
    AcoshClamped,
    AtanhClamped,
    Asinh,
    Cosh,
    Sinh,
    Square,
    Clamp(f64, f64),
}

impl Unary {
    fn name(self) -> &'static str {
        match self {
            Unary::Tanh => "tanh",
            Unary::Sigmoid => "sigmoid",
            Unary::Relu => "relu",
            Unary::Log => "log",
            Unary::Exp => "exp",
            Unary::Sqrt => "sqrt",
            Unary::AcoshClamped => "acosh_clamped",
            Unary::AtanhClamped => "atanh_clamped",
            Unary::Asinh => "asinh",
            Unary::Cosh => "cosh",
            Unary::Sinh => "sinh",
            Unary::Square => "square",
            Unary::Clamp(..) => "clamp",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Tanh => x.tanh(),
            Unary::Sigmoid => sigmoid(x),
            Unary::Relu => x.max(0.0),
            Unary::Log => x.ln(),
            Unary::Exp => x.exp(),
            Unary::Sqrt => x.sqrt(),
            Unary::AcoshClamped => x.max(1.0).acosh(),
            Unary::AtanhClamped => x.clamp(-ARTANH_MAX, ARTANH_MAX).atanh(),
            Unary::Asinh => x.asinh(),
            Unary::Cosh => x.cosh(),
            Unary::Sinh => x.sinh(),
            Unary::Square => x * x,
            Unary::Clamp(lo, hi) => x.clamp(lo, hi),
        }
    }

    /// Derivative given input `x` and output `y`.
    fn deriv(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Tanh => 1.0 - y * y,
            Unary::Sigmoid => y * (1.0 - y),
            Unary::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::Log => 1.0 / x,
            Unary::Exp => y,
            Unary::Sqrt => {
                if x > 0.0 {
                    0.5 / y
                } else {
                    0.0
                }
            }
            Unary::AcoshClamped => {
                if x > 1.0 {
                    1.0 / ((x - 1.0) * (x + 1.0)).sqrt()
                } else {
                    0.0
                }
            }
            Unary::AtanhClamped => {
                if x.abs() < ARTANH_MAX {
                    1.0 / ((1.0 - x) * (1.0 + x))
                } else {
                    0.0
                }
            }
            Unary::Asinh => 1.0 / (1.0 + x * x).sqrt(),
            Unary::Cosh => x.sinh(),
            Unary::Sinh => x.cosh(),
            Unary::Square => 2.0 * x,
            Unary::Clamp(lo, hi) => {
                if x >= lo && x <= hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
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

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    MatMul(usize, usize),
    Spmm(Rc<CsrMatrix>, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Unary(usize, Unary),
    RowNorm(usize),
    RowSum(usize),
    Sum(usize),
    Mean(usize),
    ConcatCols(usize, usize),
    SliceCols(usize, usize),
    GatherRows(usize, Rc<[usize]>),
    LogSoftmax(usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::MatMul(..) => "matmul",
            Op::Spmm(..) => "spmm",
            Op::Scale(..) => "scalar_mul",
            Op::AddScalar(..) => "add_scalar",
            Op::Unary(_, u) => u.name(),
            Op::RowNorm(..) => "row_norm",
            Op::RowSum(..) => "row_sum",
            Op::Sum(..) => "reduce_sum",
            Op::Mean(..) => "reduce_mean",
            Op::ConcatCols(..) => "concat_cols",
            Op::SliceCols(..) => "slice_cols",
            Op::GatherRows(..) => "gather_rows",
            Op::LogSoftmax(..) => "log_softmax",
        }
    }
}

struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    fault: Cell<Option<(&'static str, usize)>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("idx", &self.idx)
            .field("shape", &self.shape())
            .finish()
    }
}

/// Gradients of one backward sweep, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient w.r.t. `v`; zeros when `v` does not influence the output.
    pub fn wrt(&self, v: Var<'_>) -> Array2<f64> {
        self.grads[v.idx]
            .clone()
            .unwrap_or_else(|| Array2::zeros(self.shapes[v.idx]))
    }
}

fn broadcast_dim(a: usize, b: usize) -> usize {
    if a == b || b == 1 {
        a
    } else if a == 1 {
        b
    } else {
        panic!("cannot broadcast dimensions {a} and {b}")
    }
}

/// Sums `g` down to `shape` along broadcast axes.
fn reduce_to(g: Array2<f64>, shape: (usize, usize)) -> Array2<f64> {
    let mut g = g;
    if shape.0 == 1 && g.nrows() != 1 {
        g = g.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if shape.1 == 1 && g.ncols() != 1 {
        g = g.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    g
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &x in it {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
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

    fn push(&self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len();
        if self.fault.get().is_none() && value.iter().any(|v| !v.is_finite()) {
            self.fault.set(Some((op.name(), idx)));
        }
        nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var { tape: self, idx }
    }

    /// A leaf that gradients flow into.
    pub fn var(&self, value: Array2<f64>) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf treated as a constant.
    pub fn constant(&self, value: Array2<f64>) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Array2::from_elem((1, 1), value))
    }

    /// Records a parameter block; it requires grad only if the tensor does.
    pub fn param(&self, t: &Tensor) -> Var<'_> {
        self.push(t.value.clone(), Op::Leaf, t.requires_grad)
    }

    /// First non-finite primitive output, if any.
    pub fn check(&self) -> Result<()> {
        match self.fault.get() {
            Some((op, node)) => Err(Error::NonFinite { op, node }),
            None => Ok(()),
        }
    }

    fn needs(&self, idx: usize) -> bool {
        self.nodes.borrow()[idx].needs_grad
    }

    fn unary_op(&self, a: Var<'_>, u: Unary) -> Var<'_> {
        let value = a.value().mapv(|x| u.apply(x));
        self.push(value, Op::Unary(a.idx, u), self.needs(a.idx))
    }

    fn binary(&self, a: Var<'_>, b: Var<'_>, op: Op, f: impl Fn(f64, f64) -> f64) -> Var<'_> {
        let value = {
            let (av, bv) = (a.value(), b.value());
            let shape = (
                broadcast_dim(av.nrows(), bv.nrows()),
                broadcast_dim(av.ncols(), bv.ncols()),
            );
            let ab = av.broadcast(shape).expect("broadcast lhs");
            let bb = bv.broadcast(shape).expect("broadcast rhs");
            let mut out = Array2::zeros(shape);
            ndarray::Zip::from(&mut out)
                .and(&ab)
                .and(&bb)
                .for_each(|o, &x, &y| *o = f(x, y));
            out
        };
        let ng = self.needs(a.idx) || self.needs(b.idx);
        self.push(value, op, ng)
    }

    /// Reverse sweep from a `1 × 1` output.
    pub fn backward(&self, out: Var<'_>) -> Result<Gradients> {
        self.check()?;
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[out.idx].value.dim(), (1, 1), "backward needs a scalar output");
        let shapes: Vec<_> = nodes.iter().map(|n| n.value.dim()).collect();
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; nodes.len()];
        grads[out.idx] = Some(Array2::ones((1, 1)));

        fn acc(grads: &mut [Option<Array2<f64>>], idx: usize, g: Array2<f64>) {
            match &mut grads[idx] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=out.idx).rev() {
            let node = &nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let y = &node.value;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Add(a, b) => {
                    acc(&mut grads, *a, reduce_to(g.clone(), shapes[*a]));
                    acc(&mut grads, *b, reduce_to(g.clone(), shapes[*b]));
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, reduce_to(g.clone(), shapes[*a]));
                    acc(&mut grads, *b, reduce_to(-&g, shapes[*b]));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
                    acc(&mut grads, *a, reduce_to(&g * bv, shapes[*a]));
                    acc(&mut grads, *b, reduce_to(&g * av, shapes[*b]));
                }
                Op::Div(a, b) => {
                    let bv = &nodes[*b].value;
                    let ga = &g / bv;
                    // d(a/b)/db = -y / b
                    let gb = -(&g * y) / bv;
                    acc(&mut grads, *a, reduce_to(ga, shapes[*a]));
                    acc(&mut grads, *b, reduce_to(gb, shapes[*b]));
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
                    acc(&mut grads, *a, g.dot(&bv.t()));
                    acc(&mut grads, *b, av.t().dot(&g));
                }
                Op::Spmm(m, a) => acc(&mut grads, *a, m.transpose_matmul(&g)),
                Op::Scale(a, s) => acc(&mut grads, *a, g * *s),
                Op::AddScalar(a) => acc(&mut grads, *a, g),
                Op::Unary(a, u) => {
                    let x = &nodes[*a].value;
                    let mut ga = g;
                    ndarray::Zip::from(&mut ga)
                        .and(x)
                        .and(y)
                        .for_each(|g, &x, &y| *g *= u.deriv(x, y));
                    acc(&mut grads, *a, ga);
                }
                Op::RowNorm(a) => {
                    let x = &nodes[*a].value;
                    let mut ga = x.clone();
                    for (mut row, (&n, &gi)) in ga
                        .rows_mut()
                        .into_iter()
                        .zip(y.iter().zip(g.iter()))
                    {
                        let s = if n > 0.0 { gi / n } else { 0.0 };
                        row *= s;
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::RowSum(a) => {
                    let ga = g.broadcast(shapes[*a]).unwrap().to_owned();
                    acc(&mut grads, *a, ga);
                }
                Op::Sum(a) => acc(&mut grads, *a, Array2::from_elem(shapes[*a], g[[0, 0]])),
                Op::Mean(a) => {
                    let (r, c) = shapes[*a];
                    acc(
                        &mut grads,
                        *a,
                        Array2::from_elem((r, c), g[[0, 0]] / (r * c) as f64),
                    );
                }
                Op::ConcatCols(a, b) => {
                    let ca = shapes[*a].1;
                    acc(&mut grads, *a, g.slice(ndarray::s![.., ..ca]).to_owned());
                    acc(&mut grads, *b, g.slice(ndarray::s![.., ca..]).to_owned());
                }
                Op::SliceCols(a, start) => {
                    let mut ga = Array2::zeros(shapes[*a]);
                    ga.slice_mut(ndarray::s![.., *start..*start + g.ncols()])
                        .assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::GatherRows(a, rows) => {
                    let mut ga = Array2::zeros(shapes[*a]);
                    for (i, &r) in rows.iter().enumerate() {
                        let mut dst = ga.row_mut(r);
                        dst += &g.row(i);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::LogSoftmax(a) => {
                    let mut ga = g.clone();
                    for (mut grow, yrow) in ga.rows_mut().into_iter().zip(y.rows()) {
                        let total: f64 = grow.sum();
                        for (gv, &yv) in grow.iter_mut().zip(yrow.iter()) {
                            *gv -= yv.exp() * total;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
            }
        }
        Ok(Gradients { grads, shapes })
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Array2<f64>> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.idx].value)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value().dim()
    }

    /// The single entry of a `1 × 1` value.
    pub fn item(&self) -> f64 {
        let v = self.value();
        assert_eq!(v.dim(), (1, 1), "item() on a non-scalar");
        v[[0, 0]]
    }

    pub fn add(self, other: Var<'t>) -> Var<'t> {
        self.tape
            .binary(self, other, Op::Add(self.idx, other.idx), |a, b| a + b)
    }

    pub fn sub(self, other: Var<'t>) -> Var<'t> {
        self.tape
            .binary(self, other, Op::Sub(self.idx, other.idx), |a, b| a - b)
    }

    pub fn mul(self, other: Var<'t>) -> Var<'t> {
        self.tape
            .binary(self, other, Op::Mul(self.idx, other.idx), |a, b| a * b)
    }

    pub fn div(self, other: Var<'t>) -> Var<'t> {
        self.tape
            .binary(self, other, Op::Div(self.idx, other.idx), |a, b| a / b)
    }

    pub fn matmul(self, other: Var<'t>) -> Var<'t> {
        let value = {
            let (a, b) = (self.value(), other.value());
            assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
            a.dot(&*b)
        };
        let ng = self.tape.needs(self.idx) || self.tape.needs(other.idx);
        self.tape.push(value, Op::MatMul(self.idx, other.idx), ng)
    }

    /// Sparse-dense product `m · self`.
    pub fn spmm(self, m: &Rc<CsrMatrix>) -> Var<'t> {
        let value = m.matmul(&self.value());
        self.tape
            .push(value, Op::Spmm(Rc::clone(m), self.idx), self.tape.needs(self.idx))
    }

    pub fn scale(self, s: f64) -> Var<'t> {
        let value = &*self.value() * s;
        self.tape
            .push(value, Op::Scale(self.idx, s), self.tape.needs(self.idx))
    }

    pub fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }

    pub fn add_scalar(self, s: f64) -> Var<'t> {
        let value = &*self.value() + s;
        self.tape
            .push(value, Op::AddScalar(self.idx), self.tape.needs(self.idx))
    }

    pub fn tanh(self) -> Var<'t> {
        self.tape.unary_op(self, Unary::Tanh)
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.tape.unary_op(self, Unary::Sigmoid)
    }

    pub fn relu(self) -> Var<'t> {
        self.tape.unary_op(self, Unary::Relu)
    }

    pub fn ln(self) -> Var<'t> {
        self.tape.unary_op(self, Unary::Log)
    }

    pub fn exp(self) -> Var<'t> {
        self.tape.unary_op(self, Unary::Exp)
    }

    pub fn sqrt(self) -> Var<'t> {
        self.tape.unary_op(self, Unary::Sqrt)
    }

    /// `acosh(max(x, 1))`
    pub fn acosh_clamped(self) -> Var<'t> {
        self.tape.unary_op(self, Unary::AcoshClamped)
    }

    /// `artanh(clamp(x, ±(1 - 1e-12)))`
    pub fn atanh_clamped(self) -> Var<'t> {
        self.tape.unary_op(self, Unary::AtanhClamped)
    }

    pub fn asinh(self) -> Var<'t> {
        self.tape.unary_op(self, Unary::Asinh)
    }

    pub fn cosh(self) -> Var<'t> {
        self.tape.unary_op(self, Unary::Cosh)
    }

    pub fn sinh(self) -> Var<'t> {
        self.tape.unary_op(self, Unary::Sinh)
    }

    pub fn square(self) -> Var<'t> {
        self.tape.unary_op(self, Unary::Square)
    }

    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        self.tape.unary_op(self, Unary::Clamp(lo, hi))
    }

    pub fn clamp_min(self, lo: f64) -> Var<'t> {
        self.clamp(lo, f64::INFINITY)
    }

    pub fn clamp_max(self, hi: f64) -> Var<'t> {
        self.clamp(f64::NEG_INFINITY, hi)
    }

    /// Euclidean norm of each row, `(n, c) -> (n, 1)`.
    pub fn row_norm(self) -> Var<'t> {
        let value = self
            .value()
            .map_axis(Axis(1), |r| r.dot(&r).sqrt())
            .insert_axis(Axis(1));
        self.tape
            .push(value, Op::RowNorm(self.idx), self.tape.needs(self.idx))
    }

    /// `(n, c) -> (n, 1)`
    pub fn row_sum(self) -> Var<'t> {
        let value = self.value().sum_axis(Axis(1)).insert_axis(Axis(1));
        self.tape
            .push(value, Op::RowSum(self.idx), self.tape.needs(self.idx))
    }

    /// Compensated sum of all entries, `-> (1, 1)`.
    pub fn sum(self) -> Var<'t> {
        let s = compensated_sum(self.value().iter());
        self.tape.push(
            Array2::from_elem((1, 1), s),
            Op::Sum(self.idx),
            self.tape.needs(self.idx),
        )
    }

    pub fn mean(self) -> Var<'t> {
        let s = {
            let v = self.value();
            compensated_sum(v.iter()) / v.len() as f64
        };
        self.tape.push(
            Array2::from_elem((1, 1), s),
            Op::Mean(self.idx),
            self.tape.needs(self.idx),
        )
    }

    pub fn concat_cols(self, other: Var<'t>) -> Var<'t> {
        let value = {
            let (a, b) = (self.value(), other.value());
            assert_eq!(a.nrows(), b.nrows(), "concat_cols row mismatch");
            ndarray::concatenate(Axis(1), &[a.view(), b.view()]).unwrap()
        };
        let ng = self.tape.needs(self.idx) || self.tape.needs(other.idx);
        self.tape.push(value, Op::ConcatCols(self.idx, other.idx), ng)
    }

    /// Columns `start..end`.
    pub fn slice_cols(self, start: usize, end: usize) -> Var<'t> {
        let value = self.value().slice(ndarray::s![.., start..end]).to_owned();
        self.tape
            .push(value, Op::SliceCols(self.idx, start), self.tape.needs(self.idx))
    }

    pub fn gather_rows(self, rows: impl Into<Rc<[usize]>>) -> Var<'t> {
        let rows: Rc<[usize]> = rows.into();
        let value = self.value().select(Axis(0), &rows);
        self.tape
            .push(value, Op::GatherRows(self.idx, rows), self.tape.needs(self.idx))
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(self) -> Var<'t> {
        let mut value = self.value().to_owned();
        for mut row in value.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            row -= lse;
        }
        self.tape
            .push(value, Op::LogSoftmax(self.idx), self.tape.needs(self.idx))
    }
}
