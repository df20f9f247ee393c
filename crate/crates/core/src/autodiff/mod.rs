//! Exact differentiation of scalar fields and of losses built from their input gradients.

mod tape;

use std::ops::{Add, Div, Mul, Neg, Sub};

use ndarray::Array2;

pub use tape::{Tape, Var};

use crate::error::{Error, Result};

/// Arithmetic shared by plain floats and tape variables, so residual formulas
/// are written once and evaluated either numerically or on a tape.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn scale(self, c: f64) -> Self;
    fn offset(self, c: f64) -> Self;
}

impl Scalar for f64 {
    fn scale(self, c: f64) -> Self {
        self * c
    }
    fn offset(self, c: f64) -> Self {
        self + c
    }
}

impl Scalar for Var<'_> {
    fn scale(self, c: f64) -> Self {
        Var::scale(self, c)
    }
    fn offset(self, c: f64) -> Self {
        Var::offset(self, c)
    }
}

/// A twice-differentiable scalar field `(params, x) -> real` with a declared input arity.
///
/// `eval` receives the parameters as a `1 × param_count` row and a batch of
/// inputs as `N × input_dim`, and must return `N × 1` using tape primitives only.
pub trait DiffScalarField: Send + Sync {
    fn input_dim(&self) -> usize;

    /// Current parameter values; empty for closed-form fields.
    fn params(&self) -> &[f64];

    fn eval<'t>(&self, params: Var<'t>, x: Var<'t>) -> Var<'t>;

    fn param_count(&self) -> usize {
        self.params().len()
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::ArityMismatch { expected: self.param_count(), got: p.len() });
        }
        if !p.is_empty() {
            return Err(Error::Invalid("field has fixed parameters".into()));
        }
        Ok(())
    }

    /// Value and input gradient at one point with the current parameters.
    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        value_and_grad_input(self, self.params(), x)
    }
}

fn check_arity(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::ArityMismatch { expected, got });
    }
    Ok(())
}

/// Field values (`N × 1`) and input gradients (`N × input_dim`) of a batch, on the caller's tape.
///
/// The gradient is a differentiable node, so losses may contain it.
pub fn value_and_input_grad<'t, F: DiffScalarField + ?Sized>(
    f: &F,
    params: Var<'t>,
    x: Var<'t>,
) -> Result<(Var<'t>, Var<'t>)> {
    check_arity(f.input_dim(), x.shape().1)?;
    check_arity(f.param_count(), params.shape().1)?;
    let y = f.eval(params, x);
    let g = x.tape().gradient(y.sum(), &[x])?;
    Ok((y, g[0]))
}

/// `∇ₓ f(params, x)` at a single point.
pub fn grad_input<F: DiffScalarField + ?Sized>(f: &F, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    Ok(value_and_grad_input(f, params, x)?.1)
}

/// Value and input gradient at one point for an explicit parameter vector.
pub fn value_and_grad_input<F: DiffScalarField + ?Sized>(
    f: &F,
    params: &[f64],
    x: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_arity(f.input_dim(), x.len())?;
    check_arity(f.param_count(), params.len())?;
    let tape = Tape::new();
    let p = tape.row(params);
    let xv = tape.row(x);
    let (y, g) = value_and_input_grad(f, p, xv)?;
    Ok((y.scalar(), g.to_vec()))
}

/// Value and exact parameter gradient of a loss assembled on a fresh tape.
///
/// `loss` receives the parameters as a `1 × P` row and must return a `1 × 1`
/// node; it may take input gradients internally (see [`value_and_input_grad`]).
pub fn grad_params<L>(params: &[f64], loss: L) -> Result<(f64, Vec<f64>)>
where
    L: for<'t> FnOnce(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let p = tape.row(params);
    let l = loss(&tape, p)?;
    let g = tape.gradient(l, &[p])?;
    Ok((l.scalar(), g[0].to_vec()))
}

/// Batch of rows as a tape leaf.
pub fn rows_to_var<'t>(tape: &'t Tape, rows: &[Vec<f64>], width: usize) -> Var<'t> {
    let mut m = Array2::zeros((rows.len(), width));
    for (i, r) in rows.iter().enumerate() {
        for (j, x) in r.iter().enumerate() {
            m[[i, j]] = *x;
        }
    }
    tape.var(m)
}
