//! Rigid body with entropy-dependent energy and nonlinear friction.

use serde::{Deserialize, Serialize};

use crate::autodiff::{value_and_grad_input, DiffScalarField, Var};
use crate::error::{Error, Result};
use crate::integrators::ForceField;
use crate::state::Layout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigidBodyParams {
    pub inertia: [f64; 3],
    pub gamma: f64,
    #[serde(rename = "U0")]
    pub u0: f64,
    pub nu0: f64,
    pub nu1: f64,
    #[serde(rename = "Amix")]
    pub amix: [[f64; 3]; 3],
}

impl Default for RigidBodyParams {
    fn default() -> Self {
        RigidBodyParams {
            inertia: [1.0, 2.0, 3.0],
            gamma: 1.0,
            u0: 1.0,
            nu0: 0.01,
            nu1: 0.01,
            amix: [[1.0, 0.5, 0.5], [0.5, 1.0, 0.5], [0.5, 0.5, 1.0]],
        }
    }
}

impl RigidBodyParams {
    pub fn validate(&self) -> Result<()> {
        if self.inertia.iter().any(|i| !(*i > 0.0)) || !(self.gamma > 0.0) || !(self.u0 > 0.0) {
            return Err(Error::Invalid(format!("inertia, gamma and U0 must be positive: {self:?}")));
        }
        for i in 0..3 {
            for j in 0..3 {
                if self.amix[i][j] != self.amix[j][i] {
                    return Err(Error::Invalid("Amix must be symmetric".into()));
                }
            }
        }
        Ok(())
    }

    fn inertia_quad(&self, w: &[f64]) -> f64 {
        (0..3).map(|j| self.inertia[j] * w[j] * w[j]).sum()
    }
}

pub fn rigid_hamiltonian(rp: &RigidBodyParams, mu: [f64; 3], s: f64) -> f64 {
    let k: f64 = (0..3).map(|j| mu[j] * mu[j] / rp.inertia[j]).sum();
    (rp.gamma * s).exp() * (0.5 * k + rp.u0)
}

/// `f = −ν₀Ω − ν₁·Aᵀ·tanh(A·Ω)`; `Ω·f ≤ 0` since `ξ·tanh ξ ≥ 0`.
pub fn rigid_friction(rp: &RigidBodyParams, omega: [f64; 3], _t: f64) -> [f64; 3] {
    let a = &rp.amix;
    let th: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i][j] * omega[j]).sum::<f64>().tanh()).collect();
    std::array::from_fn(|j| -rp.nu0 * omega[j] - rp.nu1 * (0..3).map(|i| a[i][j] * th[i]).sum::<f64>())
}

/// `z = e^(γS)` from `U₀z² − (T/γ)z + ½Ω·𝕀Ω = 0`, larger root.
fn z_root(rp: &RigidBodyParams, omega: &[f64], t: f64) -> Result<f64> {
    let a = t / rp.gamma;
    let disc = a * a - 2.0 * rp.u0 * rp.inertia_quad(omega);
    if !(disc >= 0.0) || !(t > 0.0) {
        return Err(Error::OutsidePhysicalDomain(format!(
            "no entropy for Omega = {omega:?}, T = {t}"
        )));
    }
    Ok((a + disc.sqrt()) / (2.0 * rp.u0))
}

pub fn entropy_from_omega_t(rp: &RigidBodyParams, omega: [f64; 3], t: f64) -> Result<f64> {
    Ok(z_root(rp, &omega, t)?.ln() / rp.gamma)
}

/// `G(Ω, T) = ½Ω·𝕀Ω/z + T·S − U₀z` with `z = e^(γS)` from the larger root.
pub fn rigid_g_closed_form(rp: &RigidBodyParams, omega: [f64; 3], t: f64) -> Result<f64> {
    let z = z_root(rp, &omega, t)?;
    Ok(0.5 * rp.inertia_quad(&omega) / z + t * z.ln() / rp.gamma - rp.u0 * z)
}

pub fn phase_rhs(rp: &RigidBodyParams, y: &[f64]) -> Result<Vec<f64>> {
    let x = phase_to_observable(rp, y)?;
    let w = [x[0], x[1], x[2]];
    let f = rigid_friction(rp, w, x[3]);
    let m = [y[0], y[1], y[2]];
    let power: f64 = (0..3).map(|j| w[j] * f[j]).sum();
    Ok(vec![
        w[1] * m[2] - w[2] * m[1] + f[0],
        w[2] * m[0] - w[0] * m[2] + f[1],
        w[0] * m[1] - w[1] * m[0] + f[2],
        -power / x[3],
    ])
}

/// `(μ, S) → (Ω, T)` with `Ω = e^(γS)·𝕀⁻¹μ` and `T = γH`.
pub fn phase_to_observable(rp: &RigidBodyParams, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != 4 {
        return Err(Error::ArityMismatch { expected: 4, got: y.len() });
    }
    let z = (rp.gamma * y[3]).exp();
    let h = rigid_hamiltonian(rp, [y[0], y[1], y[2]], y[3]);
    Ok(vec![z * y[0] / rp.inertia[0], z * y[1] / rp.inertia[1], z * y[2] / rp.inertia[2], rp.gamma * h])
}

pub fn observable_to_phase(rp: &RigidBodyParams, x: &[f64]) -> Result<Vec<f64>> {
    let z = z_root(rp, &x[..3], x[3])?;
    Ok(vec![rp.inertia[0] * x[0] / z, rp.inertia[1] * x[1] / z, rp.inertia[2] * x[2] / z, z.ln() / rp.gamma])
}

/// `h(μ, S)`.
#[derive(Debug, Clone, Default)]
pub struct RigidHamiltonian(pub RigidBodyParams);

impl DiffScalarField for RigidHamiltonian {
    fn input_dim(&self) -> usize {
        4
    }

    fn params(&self) -> &[f64] {
        &[]
    }

    fn eval<'t>(&self, _params: Var<'t>, y: Var<'t>) -> Var<'t> {
        let rp = &self.0;
        let mut k = y.col(0).square().scale(0.5 / rp.inertia[0]);
        for j in 1..3 {
            k = k + y.col(j).square().scale(0.5 / rp.inertia[j]);
        }
        y.col(3).scale(rp.gamma).exp() * k.offset(rp.u0)
    }
}

/// Closed-form `G(Ω, T)`.
#[derive(Debug, Clone, Default)]
pub struct RigidG(pub RigidBodyParams);

impl DiffScalarField for RigidG {
    fn input_dim(&self) -> usize {
        4
    }

    fn params(&self) -> &[f64] {
        &[]
    }

    fn eval<'t>(&self, _params: Var<'t>, x: Var<'t>) -> Var<'t> {
        let rp = &self.0;
        let mut quad = x.col(0).square().scale(rp.inertia[0]);
        for j in 1..3 {
            quad = quad + x.col(j).square().scale(rp.inertia[j]);
        }
        let t = x.col(3);
        let a = t.scale(1.0 / rp.gamma);
        let disc = a.square() - quad.scale(2.0 * rp.u0);
        let z = (a + disc.sqrt()).scale(0.5 / rp.u0);
        quad.scale(0.5) / z + t * z.ln().scale(1.0 / rp.gamma) - z.scale(rp.u0)
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if x.len() != 4 {
            return Err(Error::ArityMismatch { expected: 4, got: x.len() });
        }
        let rp = &self.0;
        let z = z_root(rp, &x[..3], x[3])?;
        let g = 0.5 * rp.inertia_quad(&x[..3]) / z + x[3] * z.ln() / rp.gamma - rp.u0 * z;
        // ∂G/∂Ω = 𝕀Ω/z = μ, ∂G/∂T = S (the z-derivative vanishes on the root)
        let grad = vec![rp.inertia[0] * x[0] / z, rp.inertia[1] * x[1] / z, rp.inertia[2] * x[2] / z, z.ln() / rp.gamma];
        Ok((g, grad))
    }
}

impl RigidG {
    /// Tape-based value and gradient, bypassing the closed-form shortcut.
    pub fn value_and_grad_tape(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        value_and_grad_input(self, &[], x)
    }
}

/// The single friction channel over `(Ω, T)`.
#[derive(Debug, Clone, Default)]
pub struct RigidFriction(pub RigidBodyParams);

impl ForceField for RigidFriction {
    fn layout(&self) -> Layout {
        Layout::reduced()
    }

    fn channels(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != 4 {
            return Err(Error::ArityMismatch { expected: 4, got: x.len() });
        }
        Ok(vec![rigid_friction(&self.0, [x[0], x[1], x[2]], x[3]).to_vec()])
    }
}
