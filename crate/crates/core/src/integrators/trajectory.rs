use std::path::Path;

use super::steppers::{energy, step_flat};
use super::{ForceField, IntegratorOptions};
use crate::autodiff::DiffScalarField;
use crate::error::{Error, Result};
use crate::state::{Layout, StateKind};

/// A simulated observable trajectory with derived energy, entropy and momentum.
///
/// `entropy` is `∂G/∂T` and `momentum` is `∂G/∂v`, each shifted by a constant
/// so that row 0 equals the reference phase state when one is supplied
/// (otherwise unshifted). The shift is the affine gauge of `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub layout: Layout,
    pub h: f64,
    pub states: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub entropy: Vec<Vec<f64>>,
    pub momentum: Vec<Vec<f64>>,
}

/// Integrates `steps` steps from `x0`. `reference` is the phase state
/// `(q, p, S)` (or `(μ, S)`) at row 0, used only to fix the gauge shift.
#[allow(clippy::too_many_arguments)]
pub fn rollout<G, F>(
    g: &G,
    f: &F,
    layout: &Layout,
    x0: &[f64],
    h: f64,
    steps: usize,
    opts: &IntegratorOptions,
    reference: Option<&[f64]>,
) -> Result<Trajectory>
where
    G: DiffScalarField + ?Sized,
    F: ForceField + ?Sized,
{
    let mut states = vec![x0.to_vec()];
    for k in 0..steps {
        let next = step_flat(g, f, layout, &states[k], h, opts)
            .map_err(|e| Error::StepFailed { step: k, source: Box::new(e) })?;
        states.push(next);
    }
    let mut energies = Vec::with_capacity(states.len());
    let mut entropy = Vec::with_capacity(states.len());
    let mut momentum = Vec::with_capacity(states.len());
    for x in &states {
        energies.push(energy(g, layout, x)?);
        let (_, grad) = g.value_and_grad(x)?;
        entropy.push(grad[layout.t_range()].to_vec());
        momentum.push(grad[layout.v_range()].to_vec());
    }
    if let Some(r) = reference {
        let (nq, nv) = (layout.n_q, layout.n_v);
        if r.len() != nq + nv + layout.n_t {
            return Err(Error::ArityMismatch { expected: layout.dim(), got: r.len() });
        }
        let ds: Vec<f64> = entropy[0].iter().zip(&r[nq + nv..]).map(|(a, b)| b - a).collect();
        let dp: Vec<f64> = momentum[0].iter().zip(&r[nq..nq + nv]).map(|(a, b)| b - a).collect();
        for (s, p) in entropy.iter_mut().zip(momentum.iter_mut()) {
            s.iter_mut().zip(&ds).for_each(|(s, d)| *s += d);
            p.iter_mut().zip(&dp).for_each(|(p, d)| *p += d);
        }
    }
    Ok(Trajectory { layout: *layout, h, states, energy: energies, entropy, momentum })
}

impl Trajectory {
    pub fn header(&self) -> Vec<String> {
        let l = &self.layout;
        let (v, p) = match l.kind() {
            StateKind::Thermal => ("v", "p"),
            StateKind::Reduced => ("Omega", "mu"),
        };
        let mut h = vec!["step".to_string(), "t".to_string()];
        h.extend((0..l.n_q).map(|j| format!("q_{j}")));
        h.extend((0..l.n_v).map(|j| format!("{v}_{j}")));
        h.extend((0..l.n_t).map(|j| format!("T_{j}")));
        h.push("E".into());
        h.extend((0..l.n_t).map(|j| format!("S_{j}")));
        h.extend((0..l.n_v).map(|j| format!("{p}_{j}")));
        h
    }

    /// Writes `step,t,q..,v..,T..,E,S..,p..` (reduced: `Omega`, `mu`).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.header())?;
        for (k, x) in self.states.iter().enumerate() {
            let mut rec = vec![k.to_string(), (k as f64 * self.h).to_string()];
            rec.extend(x.iter().map(|v| v.to_string()));
            rec.push(self.energy[k].to_string());
            rec.extend(self.entropy[k].iter().map(|v| v.to_string()));
            rec.extend(self.momentum[k].iter().map(|v| v.to_string()));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Largest relative deviation of the energy from its initial value.
    pub fn energy_band(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0.abs()
    }

    /// Smallest per-step entropy increment over all channels.
    pub fn min_entropy_increment(&self) -> f64 {
        self.entropy
            .windows(2)
            .flat_map(|w| w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect::<Vec<_>>())
            .fold(f64::INFINITY, f64::min)
    }
}
