//! Matrix-valued reverse-mode tape.
//!
//! Every value on the tape is a dense `rows × cols` matrix. Batched inputs are
//! laid out one sample per row, so a scalar field evaluated on `N` samples is an
//! `N × 1` column and the gradient of its sum with respect to the input matrix
//! holds the per-sample input gradients row by row.
//!
//! The backward pass records the adjoint computation as new nodes on the same
//! tape. A gradient is therefore itself a differentiable [`Var`], which is what
//! allows losses built from input gradients (double differentiation).
//!
//! The primitive set is closed: leaves, elementwise `+ - * /`, negation,
//! scaling and offset by constants, matrix product, transpose, `sigmoid`,
//! `tanh`, `exp`, `ln`, `sqrt`, `sin`, `cos`, full and row sums, row
//! broadcasting, column extraction/scatter, horizontal stacking of columns and
//! flat-segment reshapes. Each has a derivative rule expressed in the same set.
//! Values produced by [`Tape::opaque`] carry no rule; differentiating through
//! them fails with [`Error::UnsupportedPrimitive`].

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use ndarray::{s, Array2, Axis};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    Offset(usize),
    MatMul(usize, usize),
    Transpose(usize),
    Sigmoid(usize),
    Tanh(usize),
    Exp(usize),
    Ln(usize),
    Sqrt(usize),
    Sin(usize),
    Cos(usize),
    SumAll(usize),
    Fill(usize),
    SumRows(usize),
    BroadcastRows(usize),
    Col(usize, usize),
    ScatterCol(usize, usize),
    HStack(Vec<usize>),
    Segment(usize, usize),
    Embed(usize, usize),
    Opaque(Vec<usize>, &'static str),
}

impl Op {
    fn parents(&self) -> Vec<usize> {
        match self {
            Op::Leaf => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::MatMul(a, b) => {
                vec![*a, *b]
            }
            Op::Neg(a)
            | Op::Scale(a, _)
            | Op::Offset(a)
            | Op::Transpose(a)
            | Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Exp(a)
            | Op::Ln(a)
            | Op::Sqrt(a)
            | Op::Sin(a)
            | Op::Cos(a)
            | Op::SumAll(a)
            | Op::Fill(a)
            | Op::SumRows(a)
            | Op::BroadcastRows(a)
            | Op::Col(a, _)
            | Op::ScatterCol(a, _)
            | Op::Segment(a, _)
            | Op::Embed(a, _) => vec![*a],
            Op::HStack(v) => v.clone(),
            Op::Opaque(v, _) => v.clone(),
        }
    }
}

struct Node {
    op: Op,
    value: Array2<f64>,
}

/// Recording context. Confined to one thread; build one per evaluation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.idx, self.shape())
    }
}

fn stable_sigmoid(x: f64) -> f64 {
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
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: Op, value: Array2<f64>) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { op, value });
        Var {
            tape: self,
            idx: nodes.len() - 1,
        }
    }

    /// Records a leaf. Leaves are the only nodes gradients can be taken with
    /// respect to; a leaf that is never requested acts as a constant.
    pub fn var(&self, value: Array2<f64>) -> Var<'_> {
        self.push(Op::Leaf, value)
    }

    pub fn scalar(&self, x: f64) -> Var<'_> {
        self.var(Array2::from_elem((1, 1), x))
    }

    pub fn row(&self, xs: &[f64]) -> Var<'_> {
        self.var(Array2::from_shape_vec((1, xs.len()), xs.to_vec()).expect("row shape"))
    }

    pub fn column(&self, xs: &[f64]) -> Var<'_> {
        self.var(Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).expect("column shape"))
    }

    pub fn zeros(&self, rows: usize, cols: usize) -> Var<'_> {
        self.var(Array2::zeros((rows, cols)))
    }

    /// Value computed outside the primitive set. Differentiating through it is an error.
    pub fn opaque<'t>(&'t self, name: &'static str, value: Array2<f64>, parents: &[Var<'t>]) -> Var<'t> {
        self.push(Op::Opaque(parents.iter().map(|p| p.idx).collect(), name), value)
    }

    /// Stacks `N × 1` columns into an `N × k` matrix.
    pub fn hstack<'t>(&'t self, cols: &[Var<'t>]) -> Var<'t> {
        assert!(!cols.is_empty(), "hstack of nothing");
        let value = {
            let nodes = self.nodes.borrow();
            let n = nodes[cols[0].idx].value.nrows();
            let mut out = Array2::zeros((n, cols.len()));
            for (k, c) in cols.iter().enumerate() {
                let v = &nodes[c.idx].value;
                assert_eq!(v.dim(), (n, 1), "hstack expects N x 1 columns");
                out.column_mut(k).assign(&v.column(0));
            }
            out
        };
        self.push(Op::HStack(cols.iter().map(|c| c.idx).collect()), value)
    }

    fn shape_of(&self, idx: usize) -> (usize, usize) {
        self.nodes.borrow()[idx].value.dim()
    }

    /// Gradient of the `1 × 1` node `y` with respect to each of `wrt`.
    ///
    /// The returned vars live on this tape and can be differentiated again.
    /// Inputs `y` does not depend on receive an exact zero matrix.
    pub fn gradient<'t>(&'t self, y: Var<'t>, wrt: &[Var<'t>]) -> Result<Vec<Var<'t>>> {
        if y.shape() != (1, 1) {
            return Err(Error::Invalid(format!(
                "gradient needs a 1x1 output, got {:?}",
                y.shape()
            )));
        }
        let n = y.idx + 1;
        let (needed, ops) = {
            let nodes = self.nodes.borrow();
            let mut needed = vec![false; n];
            for w in wrt {
                if w.idx < n {
                    needed[w.idx] = true;
                }
            }
            for i in 0..n {
                if !needed[i] && nodes[i].op.parents().iter().any(|&p| needed[p]) {
                    needed[i] = true;
                }
            }
            let ops: Vec<Option<Op>> = (0..n)
                .map(|i| if needed[i] { Some(nodes[i].op.clone()) } else { None })
                .collect();
            (needed, ops)
        };

        let mut adj: Vec<Option<Var<'t>>> = vec![None; n];
        if needed[y.idx] {
            adj[y.idx] = Some(self.scalar(1.0));
        }

        fn acc<'t>(adj: &mut [Option<Var<'t>>], needed: &[bool], p: usize, c: impl FnOnce() -> Var<'t>) {
            if !needed[p] {
                return;
            }
            let c = c();
            adj[p] = Some(match adj[p] {
                None => c,
                Some(e) => e + c,
            });
        }

        for i in (0..n).rev() {
            let (Some(op), Some(g)) = (ops[i].as_ref(), adj[i]) else {
                continue;
            };
            let out = Var { tape: self, idx: i };
            let v = |idx: usize| Var { tape: self, idx };
            match *op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    acc(&mut adj, &needed, a, || g);
                    acc(&mut adj, &needed, b, || g);
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, &needed, a, || g);
                    acc(&mut adj, &needed, b, || -g);
                }
                Op::Mul(a, b) => {
                    acc(&mut adj, &needed, a, || g * v(b));
                    acc(&mut adj, &needed, b, || g * v(a));
                }
                Op::Div(a, b) => {
                    acc(&mut adj, &needed, a, || g / v(b));
                    acc(&mut adj, &needed, b, || -(g * out) / v(b));
                }
                Op::Neg(a) => acc(&mut adj, &needed, a, || -g),
                Op::Scale(a, c) => acc(&mut adj, &needed, a, || g.scale(c)),
                Op::Offset(a) => acc(&mut adj, &needed, a, || g),
                Op::MatMul(a, b) => {
                    acc(&mut adj, &needed, a, || g.matmul(v(b).t()));
                    acc(&mut adj, &needed, b, || v(a).t().matmul(g));
                }
                Op::Transpose(a) => acc(&mut adj, &needed, a, || g.t()),
                Op::Sigmoid(a) => acc(&mut adj, &needed, a, || g * (out - out * out)),
                Op::Tanh(a) => acc(&mut adj, &needed, a, || g - g * (out * out)),
                Op::Exp(a) => acc(&mut adj, &needed, a, || g * out),
                Op::Ln(a) => acc(&mut adj, &needed, a, || g / v(a)),
                Op::Sqrt(a) => acc(&mut adj, &needed, a, || g.scale(0.5) / out),
                Op::Sin(a) => acc(&mut adj, &needed, a, || g * v(a).cos()),
                Op::Cos(a) => acc(&mut adj, &needed, a, || -(g * v(a).sin())),
                Op::SumAll(a) => {
                    let (r, c) = self.shape_of(a);
                    acc(&mut adj, &needed, a, || g.fill(r, c));
                }
                Op::Fill(a) => acc(&mut adj, &needed, a, || g.sum()),
                Op::SumRows(a) => {
                    let (r, _) = self.shape_of(a);
                    acc(&mut adj, &needed, a, || g.broadcast_rows(r));
                }
                Op::BroadcastRows(a) => acc(&mut adj, &needed, a, || g.sum_rows()),
                Op::Col(a, j) => {
                    let (_, c) = self.shape_of(a);
                    acc(&mut adj, &needed, a, || g.scatter_col(j, c));
                }
                Op::ScatterCol(a, j) => acc(&mut adj, &needed, a, || g.col(j)),
                Op::HStack(ref parts) => {
                    for (k, &p) in parts.iter().enumerate() {
                        acc(&mut adj, &needed, p, || g.col(k));
                    }
                }
                Op::Segment(a, start) => {
                    let (_, total) = self.shape_of(a);
                    acc(&mut adj, &needed, a, || g.embed(start, total));
                }
                Op::Embed(a, start) => {
                    let (r, c) = self.shape_of(a);
                    acc(&mut adj, &needed, a, || g.segment(start, r, c));
                }
                Op::Opaque(ref parents, name) => {
                    if parents.iter().any(|&p| needed[p]) {
                        return Err(Error::UnsupportedPrimitive(name.to_string()));
                    }
                }
            }
        }

        Ok(wrt
            .iter()
            .map(|w| match adj.get(w.idx).copied().flatten() {
                Some(g) => g,
                None => {
                    let (r, c) = w.shape();
                    self.zeros(r, c)
                }
            })
            .collect())
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Array2<f64> {
        self.tape.nodes.borrow()[self.idx].value.clone()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.shape_of(self.idx)
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self) -> f64 {
        let nodes = self.tape.nodes.borrow();
        let v = &nodes[self.idx].value;
        assert_eq!(v.dim(), (1, 1), "scalar() on non-scalar node");
        v[[0, 0]]
    }

    /// Entries in row-major order.
    pub fn to_vec(&self) -> Vec<f64> {
        self.tape.nodes.borrow()[self.idx].value.iter().copied().collect()
    }

    fn unary(self, op: Op, f: impl Fn(f64) -> f64) -> Var<'t> {
        let value = self.tape.nodes.borrow()[self.idx].value.mapv(f);
        self.tape.push(op, value)
    }

    fn binary(self, rhs: Var<'t>, op: Op, f: impl Fn(f64, f64) -> f64) -> Var<'t> {
        debug_assert!(std::ptr::eq(self.tape, rhs.tape), "vars from different tapes");
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.idx].value, &nodes[rhs.idx].value);
            assert_eq!(a.dim(), b.dim(), "elementwise shape mismatch");
            let mut out = a.clone();
            out.zip_mut_with(b, |x, &y| *x = f(*x, y));
            out
        };
        self.tape.push(op, value)
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.unary(Op::Scale(self.idx, c), |x| x * c)
    }

    pub fn offset(self, c: f64) -> Var<'t> {
        self.unary(Op::Offset(self.idx), |x| x + c)
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(Op::Sigmoid(self.idx), stable_sigmoid)
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(Op::Tanh(self.idx), f64::tanh)
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Op::Exp(self.idx), f64::exp)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(Op::Ln(self.idx), f64::ln)
    }

    pub fn sqrt(self) -> Var<'t> {
        self.unary(Op::Sqrt(self.idx), f64::sqrt)
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(Op::Sin(self.idx), f64::sin)
    }

    pub fn cos(self) -> Var<'t> {
        self.unary(Op::Cos(self.idx), f64::cos)
    }

    pub fn square(self) -> Var<'t> {
        self * self
    }

    pub fn matmul(self, rhs: Var<'t>) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            nodes[self.idx].value.dot(&nodes[rhs.idx].value)
        };
        self.tape.push(Op::MatMul(self.idx, rhs.idx), value)
    }

    pub fn t(self) -> Var<'t> {
        let value = self.tape.nodes.borrow()[self.idx].value.t().to_owned();
        self.tape.push(Op::Transpose(self.idx), value)
    }

    /// Sum of all entries, as `1 × 1`.
    pub fn sum(self) -> Var<'t> {
        let s = self.tape.nodes.borrow()[self.idx].value.sum();
        self.tape.push(Op::SumAll(self.idx), Array2::from_elem((1, 1), s))
    }

    /// Broadcasts a `1 × 1` node to `rows × cols`.
    pub fn fill(self, rows: usize, cols: usize) -> Var<'t> {
        let x = self.scalar();
        self.tape.push(Op::Fill(self.idx), Array2::from_elem((rows, cols), x))
    }

    /// Column sums, `N × k → 1 × k`.
    pub fn sum_rows(self) -> Var<'t> {
        let value = self.tape.nodes.borrow()[self.idx]
            .value
            .sum_axis(Axis(0))
            .insert_axis(Axis(0));
        self.tape.push(Op::SumRows(self.idx), value)
    }

    /// Repeats a `1 × k` row `n` times.
    pub fn broadcast_rows(self, n: usize) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let v = &nodes[self.idx].value;
            assert_eq!(v.nrows(), 1, "broadcast_rows expects a row");
            v.broadcast((n, v.ncols())).expect("broadcast").to_owned()
        };
        self.tape.push(Op::BroadcastRows(self.idx), value)
    }

    pub fn col(self, j: usize) -> Var<'t> {
        let value = self.tape.nodes.borrow()[self.idx]
            .value
            .slice(s![.., j..j + 1])
            .to_owned();
        self.tape.push(Op::Col(self.idx, j), value)
    }

    /// Places an `N × 1` column at index `j` of an otherwise zero `N × cols` matrix.
    pub fn scatter_col(self, j: usize, cols: usize) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let v = &nodes[self.idx].value;
            assert_eq!(v.ncols(), 1, "scatter_col expects a column");
            let mut out = Array2::zeros((v.nrows(), cols));
            out.column_mut(j).assign(&v.column(0));
            out
        };
        self.tape.push(Op::ScatterCol(self.idx, j), value)
    }

    /// Reshapes entries `start..start + rows*cols` of a `1 × P` row into `rows × cols` (row-major).
    pub fn segment(self, start: usize, rows: usize, cols: usize) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let v = &nodes[self.idx].value;
            assert_eq!(v.nrows(), 1, "segment expects a row");
            let flat: Vec<f64> = v.slice(s![0, start..start + rows * cols]).to_vec();
            Array2::from_shape_vec((rows, cols), flat).expect("segment shape")
        };
        self.tape.push(Op::Segment(self.idx, start), value)
    }

    /// Inverse of [`Var::segment`]: flattens into a zero `1 × total` row at `start`.
    pub fn embed(self, start: usize, total: usize) -> Var<'t> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let v = &nodes[self.idx].value;
            let mut out = Array2::zeros((1, total));
            for (k, x) in v.iter().enumerate() {
                out[[0, start + k]] = *x;
            }
            out
        };
        self.tape.push(Op::Embed(self.idx, start), value)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, Op::Add(self.idx, rhs.idx), |a, b| a + b)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, Op::Sub(self.idx, rhs.idx), |a, b| a - b)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, Op::Mul(self.idx, rhs.idx), |a, b| a * b)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, Op::Div(self.idx, rhs.idx), |a, b| a / b)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(Op::Neg(self.idx), |x| -x)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.scale(c)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.offset(c)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.offset(-c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn square_derivative() {
        let tape = Tape::new();
        let x = tape.scalar(3.0);
        let y = x * x;
        let g = tape.gradient(y, &[x]).unwrap();
        assert_eq!(g[0].scalar(), 6.0);
        // second derivative through the recorded adjoint
        let g2 = tape.gradient(g[0], &[x]).unwrap();
        assert_eq!(g2[0].scalar(), 2.0);
    }

    #[test]
    fn third_order_of_exp_is_exp() {
        let tape = Tape::new();
        let x = tape.scalar(0.7);
        let y = x.exp();
        let d1 = tape.gradient(y, &[x]).unwrap()[0];
        let d2 = tape.gradient(d1, &[x]).unwrap()[0];
        let d3 = tape.gradient(d2, &[x]).unwrap()[0];
        assert!((d3.scalar() - 0.7f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn matmul_gradient() {
        let tape = Tape::new();
        let a = tape.var(array![[1.0, 2.0], [3.0, 4.0]]);
        let b = tape.var(array![[0.5], [-1.0]]);
        let y = a.matmul(b).sum();
        let g = tape.gradient(y, &[a, b]).unwrap();
        assert_eq!(g[0].value(), array![[0.5, -1.0], [0.5, -1.0]]);
        assert_eq!(g[1].value(), array![[4.0], [6.0]]);
    }

    #[test]
    fn independent_input_gets_exact_zero() {
        let tape = Tape::new();
        let x = tape.scalar(2.0);
        let z = tape.row(&[1.0, 2.0, 3.0]);
        let y = x.sin();
        let g = tape.gradient(y, &[z]).unwrap();
        assert_eq!(g[0].value(), array![[0.0, 0.0, 0.0]]);
    }

    #[test]
    fn opaque_blocks_differentiation() {
        let tape = Tape::new();
        let x = tape.scalar(2.0);
        let y = tape.opaque("abs", array![[2.0]], &[x]);
        let err = tape.gradient(y * y, &[x]).unwrap_err();
        assert_eq!(err, Error::UnsupportedPrimitive("abs".into()));
        // not an error when the opaque node is off the path
        let z = x * x + y;
        let g = tape.gradient(z, &[y]);
        assert!(g.is_ok());
    }

    #[test]
    fn segment_embed_roundtrip_gradient() {
        let tape = Tape::new();
        let p = tape.row(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let w = p.segment(1, 2, 3);
        assert_eq!(w.value(), array![[2.0, 3.0, 4.0], [5.0, 6.0, 7.0]]);
        let y = (w * w).sum();
        let g = tape.gradient(y, &[p]).unwrap();
        assert_eq!(g[0].to_vec(), vec![0.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]);
    }

    #[test]
    fn gradient_requires_scalar_output() {
        let tape = Tape::new();
        let x = tape.row(&[1.0, 2.0]);
        assert!(tape.gradient(x, &[x]).is_err());
    }
}
