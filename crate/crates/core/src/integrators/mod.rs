//! Variational integrators in observable variables, their residual forms and
//! the implicit-step solver.
//!
//! The residuals are written once over [`Scalar`](crate::autodiff::Scalar) so
//! the same formulas drive both forward simulation (plain floats) and learning
//! (tape variables, one column per sample).

mod newton;
mod residual;
mod steppers;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::nets::{DissipativeForceModel, RawForceModel};
use crate::state::Layout;

pub use crate::nets::{hat, vee};
pub use newton::{newton_solve, NewtonOptions};
pub use residual::{so3_residuals, thermal_residuals, Endpoint};
pub use steppers::{
    endpoint, energy, residuals_flat, residuals_so3, residuals_thermal, step_canonical, step_flat, step_so3,
    step_thermal,
};
pub use trajectory::{rollout, Trajectory};

/// Velocity used in the entropy line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyVelocity {
    /// The observed `v_k`.
    #[default]
    State,
    /// `(q_{k+1} − q_k)/h`.
    Difference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorOptions {
    pub newton_tol: f64,
    pub max_iter: usize,
    /// Average the forces of both ends in the momentum line.
    pub force_midpoint: bool,
    pub entropy_velocity: EntropyVelocity,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            newton_tol: 1e-11,
            max_iter: 50,
            force_midpoint: false,
            entropy_velocity: EntropyVelocity::State,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub r_momentum: Vec<f64>,
    pub r_entropy: Vec<f64>,
    pub r_velocity: Vec<f64>,
}

impl ResidualReport {
    pub fn max_abs(&self) -> f64 {
        self.r_momentum
            .iter()
            .chain(&self.r_entropy)
            .chain(&self.r_velocity)
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Friction split into entropy channels; each channel returns a vector over
/// the velocity block of `layout()`.
pub trait ForceField: Send + Sync {
    fn layout(&self) -> Layout;

    fn channels(&self) -> usize;

    fn param_count(&self) -> usize {
        0
    }

    fn params(&self) -> Vec<f64> {
        Vec::new()
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::ArityMismatch { expected: 0, got: p.len() })
        }
    }

    /// Channel forces at one observable state.
    fn eval(&self, x: &[f64]) -> Result<Vec<Vec<f64>>>;

    /// Batched channel forces, one `N × 1` column per velocity component.
    ///
    /// The default evaluates numerically and records constants, which is
    /// exact for parameter-free fields.
    fn eval_tape<'t>(&self, params: Var<'t>, x: Var<'t>) -> Result<Vec<Vec<Var<'t>>>> {
        let _ = params;
        if self.param_count() != 0 {
            return Err(Error::UnsupportedPrimitive("ForceField::eval_tape".into()));
        }
        let xs = x.value();
        let mut cols = vec![vec![Vec::with_capacity(xs.nrows()); self.layout().n_v]; self.channels()];
        for row in xs.rows() {
            let f = self.eval(row.as_slice().expect("contiguous row"))?;
            for (c, fc) in f.iter().enumerate() {
                for (j, v) in fc.iter().enumerate() {
                    cols[c][j].push(*v);
                }
            }
        }
        let tape = x.tape();
        Ok(cols.iter().map(|ch| ch.iter().map(|c| tape.column(c)).collect()).collect())
    }
}

/// No friction in any channel.
#[derive(Debug, Clone, Copy)]
pub struct ZeroForce {
    pub layout: Layout,
}

impl ForceField for ZeroForce {
    fn layout(&self) -> Layout {
        self.layout
    }

    fn channels(&self) -> usize {
        self.layout.n_t
    }

    fn eval(&self, _x: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(vec![vec![0.0; self.layout.n_v]; self.layout.n_t])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelNet {
    Dissipative(DissipativeForceModel),
    Raw(RawForceModel),
}

impl ChannelNet {
    fn params(&self) -> &[f64] {
        match self {
            ChannelNet::Dissipative(m) => m.net().params(),
            ChannelNet::Raw(m) => m.net().params(),
        }
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        match self {
            ChannelNet::Dissipative(m) => m.net_mut().set_params(p),
            ChannelNet::Raw(m) => m.net_mut().set_params(p),
        }
    }
}

/// One network per entropy channel, each fed the full observable vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NetForce {
    layout: Layout,
    nets: Vec<ChannelNet>,
}

impl NetForce {
    pub fn new(layout: Layout, nets: Vec<ChannelNet>) -> Result<Self> {
        if nets.len() != layout.n_t {
            return Err(Error::ArityMismatch { expected: layout.n_t, got: nets.len() });
        }
        for net in &nets {
            let (input, n) = match net {
                ChannelNet::Dissipative(m) => (m.net().arch().input, m.n()),
                ChannelNet::Raw(m) => (m.net().arch().input, m.net().arch().output),
            };
            if input != layout.dim() {
                return Err(Error::ArityMismatch { expected: layout.dim(), got: input });
            }
            if n != layout.n_v {
                return Err(Error::ArityMismatch { expected: layout.n_v, got: n });
            }
        }
        Ok(NetForce { layout, nets })
    }

    pub fn nets(&self) -> &[ChannelNet] {
        &self.nets
    }
}

impl ForceField for NetForce {
    fn layout(&self) -> Layout {
        self.layout
    }

    fn channels(&self) -> usize {
        self.nets.len()
    }

    fn param_count(&self) -> usize {
        self.nets.iter().map(|n| n.params().len()).sum()
    }

    fn params(&self) -> Vec<f64> {
        self.nets.iter().flat_map(|n| n.params().iter().copied()).collect()
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::ArityMismatch { expected: self.param_count(), got: p.len() });
        }
        let mut off = 0;
        for net in &mut self.nets {
            let k = net.params().len();
            net.set_params(&p[off..off + k])?;
            off += k;
        }
        Ok(())
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let v = &x[self.layout.v_range()];
        self.nets
            .iter()
            .map(|net| match net {
                ChannelNet::Dissipative(m) => m.force(x, v),
                ChannelNet::Raw(m) => m.force(x),
            })
            .collect()
    }

    fn eval_tape<'t>(&self, params: Var<'t>, x: Var<'t>) -> Result<Vec<Vec<Var<'t>>>> {
        if params.shape().1 != self.param_count() {
            return Err(Error::ArityMismatch { expected: self.param_count(), got: params.shape().1 });
        }
        let v: Vec<Var> = self.layout.v_range().map(|j| x.col(j)).collect();
        let mut off = 0;
        let mut out = Vec::with_capacity(self.nets.len());
        for net in &self.nets {
            let k = net.params().len();
            let p = params.segment(off, 1, k);
            off += k;
            out.push(match net {
                ChannelNet::Dissipative(m) => m.force_tape(p, x, &v),
                ChannelNet::Raw(m) => m.force_tape(p, x),
            });
        }
        Ok(out)
    }
}
