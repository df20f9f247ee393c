//! Transformations of `(G, F)` that leave the residuals unchanged or rescale them.
//!
//! They make the joint identification of `G` and `F` from observables
//! ill-posed, and serve as exact checks on the loss.

use crate::autodiff::{DiffScalarField, Var};
use crate::error::Result;
use crate::integrators::ForceField;
use crate::state::Layout;

fn coefficient_column<'t>(x: Var<'t>, layout: &Layout, q: &[f64], v: &[f64], t: &[f64]) -> Var<'t> {
    let mut c = vec![0.0; layout.dim()];
    c[layout.q_range()].copy_from_slice(q);
    c[layout.v_range()].copy_from_slice(v);
    c[layout.t_range()].copy_from_slice(t);
    x.tape().column(&c)
}

/// `G + g0 + s0·T + p0·v`.
pub struct AffineShift<'a> {
    pub inner: &'a dyn DiffScalarField,
    pub layout: Layout,
    pub g0: f64,
    pub s0: Vec<f64>,
    pub p0: Vec<f64>,
}

impl DiffScalarField for AffineShift<'_> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn params(&self) -> &[f64] {
        self.inner.params()
    }

    fn eval<'t>(&self, params: Var<'t>, x: Var<'t>) -> Var<'t> {
        let c = coefficient_column(x, &self.layout, &vec![0.0; self.layout.n_q], &self.p0, &self.s0);
        (self.inner.eval(params, x) + x.matmul(c)).offset(self.g0)
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (mut val, mut grad) = self.inner.value_and_grad(x)?;
        val += self.g0;
        for (k, j) in self.layout.v_range().enumerate() {
            val += self.p0[k] * x[j];
            grad[j] += self.p0[k];
        }
        for (k, j) in self.layout.t_range().enumerate() {
            val += self.s0[k] * x[j];
            grad[j] += self.s0[k];
        }
        Ok((val, grad))
    }
}

/// `k·G`.
pub struct ScaledG<'a> {
    pub inner: &'a dyn DiffScalarField,
    pub k: f64,
}

impl DiffScalarField for ScaledG<'_> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn params(&self) -> &[f64] {
        self.inner.params()
    }

    fn eval<'t>(&self, params: Var<'t>, x: Var<'t>) -> Var<'t> {
        self.inner.eval(params, x).scale(self.k)
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (v, g) = self.inner.value_and_grad(x)?;
        Ok((self.k * v, g.iter().map(|g| self.k * g).collect()))
    }
}

/// `k·F` in every channel.
pub struct ScaledForce<'a> {
    pub inner: &'a dyn ForceField,
    pub k: f64,
}

impl ForceField for ScaledForce<'_> {
    fn layout(&self) -> Layout {
        self.inner.layout()
    }

    fn channels(&self) -> usize {
        self.inner.channels()
    }

    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn params(&self) -> Vec<f64> {
        self.inner.params()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.inner.eval(x)?.into_iter().map(|c| c.iter().map(|f| self.k * f).collect()).collect())
    }

    fn eval_tape<'t>(&self, params: Var<'t>, x: Var<'t>) -> Result<Vec<Vec<Var<'t>>>> {
        Ok(self.inner.eval_tape(params, x)?.into_iter().map(|c| c.into_iter().map(|f| f.scale(self.k)).collect()).collect())
    }
}

/// `G + Σᵢ Tᵢ·(aᵢ·q)`, paired with [`TemperatureShiftForce`].
pub struct TemperatureShiftG<'a> {
    pub inner: &'a dyn DiffScalarField,
    pub layout: Layout,
    /// One coordinate covector per entropy channel.
    pub a: Vec<Vec<f64>>,
}

impl DiffScalarField for TemperatureShiftG<'_> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn params(&self) -> &[f64] {
        self.inner.params()
    }

    fn eval<'t>(&self, params: Var<'t>, x: Var<'t>) -> Var<'t> {
        let l = &self.layout;
        let mut g = self.inner.eval(params, x);
        for (i, j) in l.t_range().enumerate() {
            let c = coefficient_column(x, l, &self.a[i], &vec![0.0; l.n_v], &vec![0.0; l.n_t]);
            g = g + x.col(j) * x.matmul(c);
        }
        g
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let l = &self.layout;
        let (mut val, mut grad) = self.inner.value_and_grad(x)?;
        let q = &x[l.q_range()];
        for (i, j) in l.t_range().enumerate() {
            let aq: f64 = self.a[i].iter().zip(q).map(|(a, q)| a * q).sum();
            val += x[j] * aq;
            grad[j] += aq;
            for (k, qj) in l.q_range().enumerate() {
                grad[qj] += x[j] * self.a[i][k];
            }
        }
        Ok((val, grad))
    }
}

/// `Fᵢ − Tᵢ·aᵢ`.
pub struct TemperatureShiftForce<'a> {
    pub inner: &'a dyn ForceField,
    pub a: Vec<Vec<f64>>,
}

impl ForceField for TemperatureShiftForce<'_> {
    fn layout(&self) -> Layout {
        self.inner.layout()
    }

    fn channels(&self) -> usize {
        self.inner.channels()
    }

    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn params(&self) -> Vec<f64> {
        self.inner.params()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let l = self.layout();
        let mut f = self.inner.eval(x)?;
        for (i, j) in l.t_range().enumerate() {
            for (fk, ak) in f[i].iter_mut().zip(&self.a[i]) {
                *fk -= x[j] * ak;
            }
        }
        Ok(f)
    }

    fn eval_tape<'t>(&self, params: Var<'t>, x: Var<'t>) -> Result<Vec<Vec<Var<'t>>>> {
        let l = self.layout();
        let mut f = self.inner.eval_tape(params, x)?;
        for (i, j) in l.t_range().enumerate() {
            for (fk, ak) in f[i].iter_mut().zip(&self.a[i]) {
                *fk = *fk - x.col(j).scale(*ak);
            }
        }
        Ok(f)
    }
}
