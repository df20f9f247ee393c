//! Two gas chambers separated by a moving piston.

use serde::{Deserialize, Serialize};

use crate::autodiff::{value_and_grad_input, DiffScalarField, Var};
use crate::error::{Error, Result};
use crate::integrators::ForceField;
use crate::state::{Layout, ObservableState, PhaseState};

/// Piston parameters. The left chamber has area `A1`, the right `A2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PistonParams {
    pub m: f64,
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "NkB")]
    pub nkb: f64,
    pub c_hat: f64,
    pub nu: [f64; 2],
    pub kappa: [f64; 2],
}

impl Default for PistonParams {
    fn default() -> Self {
        PistonParams {
            m: 1.0,
            a1: 1.0,
            a2: 2.0,
            l: 2.0,
            nkb: 1.0,
            c_hat: 1.0,
            nu: [0.02, 0.04],
            kappa: [2.0, 1.0],
        }
    }
}

impl PistonParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.m, self.a1, self.a2, self.l, self.nkb, self.c_hat, self.nu[0], self.nu[1]];
        if all.iter().any(|x| !(*x > 0.0)) || self.kappa.iter().any(|k| !(*k >= 0.0)) {
            return Err(Error::Invalid(format!("piston parameters must be positive: {self:?}")));
        }
        Ok(())
    }

    pub fn volumes(&self, x: f64) -> Result<[f64; 2]> {
        if !(x.abs() < self.l) {
            return Err(Error::PistonOutOfRange { x, l: self.l });
        }
        Ok([self.a1 * (self.l + x), self.a2 * (self.l - x)])
    }

    /// `dV_i/dx`.
    fn volume_slopes(&self) -> [f64; 2] {
        [self.a1, -self.a2]
    }

    pub fn friction_coefficient(&self, i: usize, v: f64, t: f64) -> f64 {
        self.nu[i] + self.kappa[i] * v * v * (1.0 + 0.1 * t * t)
    }
}

/// Internal energy of an ideal gas, `(ĉV)^(−2/3)·e^(S/NkB)`.
pub fn sackur_tetrode_u(s: f64, v: f64, nkb: f64, c_hat: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::NonpositiveVolume(v));
    }
    Ok((c_hat * v).powf(-2.0 / 3.0) * (s / nkb).exp())
}

pub fn piston_hamiltonian(p: &PistonParams, s: &PhaseState) -> Result<f64> {
    check_phase(s)?;
    let vol = p.volumes(s.q[0])?;
    let mut h = s.p[0] * s.p[0] / (2.0 * p.m);
    for i in 0..2 {
        h += sackur_tetrode_u(s.s[i], vol[i], p.nkb, p.c_hat)?;
    }
    Ok(h)
}

/// Friction channels `−λ_i·v`, each dissipative since `λ_i > 0`.
pub fn piston_forces(p: &PistonParams, obs: &ObservableState) -> Result<Vec<Vec<f64>>> {
    if obs.q().len() != 1 || obs.t().len() != 2 {
        return Err(Error::ArityMismatch { expected: 4, got: obs.to_vec().len() });
    }
    p.volumes(obs.q()[0])?;
    let v = obs.v()[0];
    Ok((0..2).map(|i| vec![-p.friction_coefficient(i, v, obs.t()[i]) * v]).collect())
}

fn check_phase(s: &PhaseState) -> Result<()> {
    if s.q.len() != 1 || s.s.len() != 2 {
        return Err(Error::ArityMismatch { expected: 4, got: s.to_vec().len() });
    }
    Ok(())
}

/// `−∂(U₁ + U₂)/∂x`.
pub fn conservative_force(p: &PistonParams, x: f64, s: [f64; 2]) -> Result<f64> {
    let vol = p.volumes(x)?;
    let dv = p.volume_slopes();
    let mut f = 0.0;
    for i in 0..2 {
        let u = sackur_tetrode_u(s[i], vol[i], p.nkb, p.c_hat)?;
        f += 2.0 / 3.0 * u / vol[i] * dv[i];
    }
    Ok(f)
}

/// Right-hand side of the phase-space equations for `(x, p, S₁, S₂)`.
pub fn phase_rhs(p: &PistonParams, y: &[f64]) -> Result<Vec<f64>> {
    let v = y[1] / p.m;
    let vol = p.volumes(y[0])?;
    let t: Vec<f64> = (0..2)
        .map(|i| Ok(sackur_tetrode_u(y[2 + i], vol[i], p.nkb, p.c_hat)? / p.nkb))
        .collect::<Result<_>>()?;
    let lam = [p.friction_coefficient(0, v, t[0]), p.friction_coefficient(1, v, t[1])];
    Ok(vec![
        v,
        conservative_force(p, y[0], [y[2], y[3]])? - (lam[0] + lam[1]) * v,
        lam[0] * v * v / t[0],
        lam[1] * v * v / t[1],
    ])
}

pub fn phase_to_observable(p: &PistonParams, y: &[f64]) -> Result<Vec<f64>> {
    let vol = p.volumes(y[0])?;
    let mut x = vec![y[0], y[1] / p.m];
    for i in 0..2 {
        x.push(sackur_tetrode_u(y[2 + i], vol[i], p.nkb, p.c_hat)? / p.nkb);
    }
    Ok(x)
}

pub fn observable_to_phase(p: &PistonParams, x: &[f64]) -> Result<Vec<f64>> {
    let vol = p.volumes(x[0])?;
    let mut y = vec![x[0], p.m * x[1]];
    for i in 0..2 {
        y.push(entropy(p, x[2 + i], vol[i]));
    }
    Ok(y)
}

fn entropy(p: &PistonParams, t: f64, vol: f64) -> f64 {
    p.nkb * ((p.nkb * t).ln() + 2.0 / 3.0 * (p.c_hat * vol).ln())
}

fn volume_cols<'t>(p: &PistonParams, x: Var<'t>) -> [Var<'t>; 2] {
    [x.offset(p.l).scale(p.a1), x.scale(-1.0).offset(p.l).scale(p.a2)]
}

/// `H(x, p, S₁, S₂)`.
#[derive(Debug, Clone, Default)]
pub struct PistonHamiltonian(pub PistonParams);

impl DiffScalarField for PistonHamiltonian {
    fn input_dim(&self) -> usize {
        4
    }

    fn params(&self) -> &[f64] {
        &[]
    }

    fn eval<'t>(&self, _params: Var<'t>, z: Var<'t>) -> Var<'t> {
        let p = &self.0;
        let mom = z.col(1);
        let mut h = mom.square().scale(0.5 / p.m);
        for (i, vol) in volume_cols(p, z.col(0)).into_iter().enumerate() {
            let e = z.col(2 + i).scale(1.0 / p.nkb) - vol.scale(p.c_hat).ln().scale(2.0 / 3.0);
            h = h + e.exp();
        }
        h
    }

    fn value_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        if z.len() == 4 {
            self.0.volumes(z[0])?;
        }
        value_and_grad_input(self, &[], z)
    }
}

/// Free energy in observable variables,
/// `G = ½mv² + Σ NkB·T_i·(ln(NkB·T_i) + ⅔·ln(ĉV_i) − 1)`.
#[derive(Debug, Clone, Default)]
pub struct PistonG(pub PistonParams);

impl PistonG {
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let p = &self.0;
        let vol = p.volumes(x[0])?;
        let mut g = 0.5 * p.m * x[1] * x[1];
        for i in 0..2 {
            let t = x[2 + i];
            if !(t > 0.0) {
                return Err(Error::NonpositiveTemperature { channel: i, value: t });
            }
            g += p.nkb * t * (entropy(p, t, vol[i]) / p.nkb - 1.0);
        }
        Ok(g)
    }
}

impl DiffScalarField for PistonG {
    fn input_dim(&self) -> usize {
        4
    }

    fn params(&self) -> &[f64] {
        &[]
    }

    fn eval<'t>(&self, _params: Var<'t>, x: Var<'t>) -> Var<'t> {
        let p = &self.0;
        let mut g = x.col(1).square().scale(0.5 * p.m);
        for (i, vol) in volume_cols(p, x.col(0)).into_iter().enumerate() {
            let nt = x.col(2 + i).scale(p.nkb);
            let inner = nt.ln() + vol.scale(p.c_hat).ln().scale(2.0 / 3.0);
            g = g + nt * inner.offset(-1.0);
        }
        g
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = &self.0;
        if x.len() != 4 {
            return Err(Error::ArityMismatch { expected: 4, got: x.len() });
        }
        let g = self.value(x)?;
        let vol = p.volumes(x[0])?;
        let dv = p.volume_slopes();
        let mut grad = vec![0.0, p.m * x[1], 0.0, 0.0];
        for i in 0..2 {
            let t = x[2 + i];
            grad[0] += p.nkb * t * 2.0 / 3.0 * dv[i] / vol[i];
            grad[2 + i] = entropy(p, t, vol[i]);
        }
        Ok((g, grad))
    }
}

/// The two friction channels as a force field over `(x, v, T₁, T₂)`.
#[derive(Debug, Clone, Default)]
pub struct PistonFriction(pub PistonParams);

impl ForceField for PistonFriction {
    fn layout(&self) -> Layout {
        Layout::thermal(1, 2)
    }

    fn channels(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != 4 {
            return Err(Error::ArityMismatch { expected: 4, got: x.len() });
        }
        let v = x[1];
        Ok((0..2).map(|i| vec![-self.0.friction_coefficient(i, v, x[2 + i]) * v]).collect())
    }
}
