//! Ground-truth benchmark systems and the reference ODE solver.

pub mod piston;
mod reference;
pub mod rigid;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::DiffScalarField;
use crate::error::{Error, Result};
use crate::integrators::ForceField;
use crate::state::{Layout, PhaseState};

pub use piston::{PistonFriction, PistonG, PistonHamiltonian, PistonParams};
pub use reference::{dopri5, Tolerance};
pub use rigid::{RigidBodyParams, RigidFriction, RigidG, RigidHamiltonian};

/// Box from which initial phase states are drawn uniformly.
///
/// For the rigid body `p` bounds each component of `μ` and `q` is unused.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingBox {
    pub q: [f64; 2],
    pub p: [f64; 2],
    pub s: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub enum System {
    Piston(PistonParams),
    RigidBody(RigidBodyParams),
}

impl System {
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "piston" => Ok(System::Piston(PistonParams::default())),
            "rigid_body" => Ok(System::RigidBody(RigidBodyParams::default())),
            other => Err(Error::Invalid(format!("unknown system `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            System::Piston(_) => "piston",
            System::RigidBody(_) => "rigid_body",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            System::Piston(p) => p.validate(),
            System::RigidBody(p) => p.validate(),
        }
    }

    pub fn layout(&self) -> Layout {
        match self {
            System::Piston(_) => Layout::thermal(1, 2),
            System::RigidBody(_) => Layout::reduced(),
        }
    }

    pub fn exact_g(&self) -> Box<dyn DiffScalarField> {
        match self {
            System::Piston(p) => Box::new(PistonG(p.clone())),
            System::RigidBody(p) => Box::new(RigidG(p.clone())),
        }
    }

    pub fn exact_force(&self) -> Box<dyn ForceField> {
        match self {
            System::Piston(p) => Box::new(PistonFriction(p.clone())),
            System::RigidBody(p) => Box::new(RigidFriction(p.clone())),
        }
    }

    /// Hamiltonian over the flat phase vector `(q, p, S)` or `(μ, S)`.
    pub fn hamiltonian(&self) -> Box<dyn DiffScalarField> {
        match self {
            System::Piston(p) => Box::new(PistonHamiltonian(p.clone())),
            System::RigidBody(p) => Box::new(RigidHamiltonian(p.clone())),
        }
    }

    pub fn phase_rhs(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            System::Piston(p) => piston::phase_rhs(p, y),
            System::RigidBody(p) => rigid::phase_rhs(p, y),
        }
    }

    pub fn phase_to_observable(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            System::Piston(p) => piston::phase_to_observable(p, y),
            System::RigidBody(p) => rigid::phase_to_observable(p, y),
        }
    }

    pub fn observable_to_phase(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            System::Piston(p) => piston::observable_to_phase(p, x),
            System::RigidBody(p) => rigid::observable_to_phase(p, x),
        }
    }

    /// Initial phase state of the validation runs.
    pub fn validation_phase(&self) -> Vec<f64> {
        match self {
            System::Piston(_) => vec![0.5, -0.5, 0.5, 0.5],
            System::RigidBody(_) => vec![0.5, -0.5, -0.5, 0.0],
        }
    }

    pub fn default_box(&self) -> SamplingBox {
        match self {
            System::Piston(_) => SamplingBox { q: [-1.0, 1.0], p: [-1.0, 1.0], s: [0.0, 1.0] },
            System::RigidBody(_) => SamplingBox { q: [0.0, 0.0], p: [-1.0, 1.0], s: [0.0, 1.0] },
        }
    }

    pub fn sample_phase<R: Rng>(&self, rng: &mut R, b: &SamplingBox) -> Vec<f64> {
        let mut u = |r: [f64; 2]| if r[0] < r[1] { rng.random_range(r[0]..r[1]) } else { r[0] };
        match self {
            System::Piston(_) => vec![u(b.q), u(b.p), u(b.s), u(b.s)],
            System::RigidBody(_) => vec![u(b.p), u(b.p), u(b.p), u(b.s)],
        }
    }

    /// High-accuracy solution of the phase-space equations on `t_grid`.
    pub fn reference_integrate(&self, y0: &[f64], t_grid: &[f64], tol: Tolerance) -> Result<Vec<Vec<f64>>> {
        dopri5(|y| self.phase_rhs(y), y0, t_grid, tol)
    }
}

/// Typed entry point for the piston.
pub fn reference_integrate(
    system: &System,
    y0: &PhaseState,
    t_grid: &[f64],
    tol: Tolerance,
) -> Result<Vec<PhaseState>> {
    let n = y0.q.len();
    system
        .reference_integrate(&y0.to_vec(), t_grid, tol)?
        .iter()
        .map(|y| PhaseState::from_slice(n, y))
        .collect()
}
