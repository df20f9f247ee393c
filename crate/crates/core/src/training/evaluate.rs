use std::path::Path;

use serde::{Deserialize, Serialize};

use super::models::Models;
use crate::error::{Error, Result};
use crate::integrators::{rollout, IntegratorOptions, Trajectory};
use crate::systems::{System, Tolerance};

/// Entropy increments below this count as violations.
pub const ENTROPY_SLACK: f64 = -1e-12;

/// Reference solution on the uniform grid, in the same shape as a simulated
/// trajectory: observables plus the true energy, entropy and momentum.
pub fn reference_trajectory(system: &System, y0: &[f64], h: f64, steps: usize, tol: Tolerance) -> Result<Trajectory> {
    let layout = system.layout();
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    let phases = system.reference_integrate(y0, &grid, tol)?;
    let ham = system.hamiltonian();
    let (nq, nv) = (layout.n_q, layout.n_v);
    let mut t = Trajectory {
        layout,
        h,
        states: Vec::with_capacity(phases.len()),
        energy: Vec::with_capacity(phases.len()),
        entropy: Vec::with_capacity(phases.len()),
        momentum: Vec::with_capacity(phases.len()),
    };
    for y in &phases {
        t.states.push(system.phase_to_observable(y)?);
        t.energy.push(ham.value_and_grad(y)?.0);
        t.momentum.push(y[nq..nq + nv].to_vec());
        t.entropy.push(y[nq + nv..].to_vec());
    }
    Ok(t)
}

/// Per-column comparison of two tables on the same time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rows: usize,
    pub columns: Vec<String>,
    pub mae: Vec<f64>,
    /// Largest MAE over the observable columns (`q`, `v`/`Omega`, `T`).
    pub max_observable_mae: f64,
    /// `max |E − E₀| / |E₀|` of the first table, when it has an energy column.
    pub energy_drift: Option<f64>,
    /// Entropy increments below the slack in the first table.
    pub entropy_violations: usize,
}

pub fn is_observable_column(name: &str) -> bool {
    ["q_", "v_", "Omega_", "T_"].iter().any(|p| name.starts_with(p))
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Invalid(format!("{}: `{s}`: {e}", path.display()))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn from_trajectory(t: &Trajectory) -> Self {
        let rows = (0..t.states.len())
            .map(|k| {
                let mut r = vec![k as f64, k as f64 * t.h];
                r.extend(&t.states[k]);
                r.push(t.energy[k]);
                r.extend(&t.entropy[k]);
                r.extend(&t.momentum[k]);
                r
            })
            .collect();
        Table { header: t.header(), rows }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn compare_tables(a: &Table, b: &Table) -> Result<Metrics> {
    if a.rows.len() != b.rows.len() {
        return Err(Error::GridMismatch(format!("{} rows vs {} rows", a.rows.len(), b.rows.len())));
    }
    if let (Some(ta), Some(tb)) = (a.column("t"), b.column("t")) {
        for (k, (x, y)) in ta.iter().zip(&tb).enumerate() {
            if (x - y).abs() > 1e-9 * x.abs().max(1.0) {
                return Err(Error::GridMismatch(format!("row {k}: t = {x} vs {y}")));
            }
        }
    }
    let mut columns = Vec::new();
    let mut mae = Vec::new();
    for name in &a.header {
        if name == "step" || name == "t" {
            continue;
        }
        if let (Some(x), Some(y)) = (a.column(name), b.column(name)) {
            let n = x.len().max(1) as f64;
            columns.push(name.clone());
            mae.push(x.iter().zip(&y).map(|(x, y)| (x - y).abs()).sum::<f64>() / n);
        }
    }
    let max_observable_mae = columns
        .iter()
        .zip(&mae)
        .filter(|(c, _)| is_observable_column(c))
        .map(|(_, m)| *m)
        .fold(0.0, f64::max);
    let energy_drift = a.column("E").filter(|e| !e.is_empty()).map(|e| {
        let e0 = e[0];
        e.iter().map(|x| (x - e0).abs()).fold(0.0, f64::max) / e0.abs()
    });
    let entropy_violations = a
        .header
        .iter()
        .filter(|h| h.starts_with("S_"))
        .filter_map(|h| a.column(h))
        .map(|s| s.windows(2).filter(|w| w[1] - w[0] < ENTROPY_SLACK).count())
        .sum();
    Ok(Metrics { rows: a.rows.len(), columns, mae, max_observable_mae, energy_drift, entropy_violations })
}

/// Rolls the models from the system's validation state and compares with the reference.
pub fn reconstruction(models: &Models, h: f64, steps: usize, opts: &IntegratorOptions, tol: Tolerance) -> Result<Metrics> {
    let system = models.system();
    let y0 = system.validation_phase();
    let x0 = system.phase_to_observable(&y0)?;
    let reference = reference_trajectory(system, &y0, h, steps, tol)?;
    let sim = rollout(models.g(), models.f(), &system.layout(), &x0, h, steps, opts, Some(&y0))?;
    compare_tables(&Table::from_trajectory(&sim), &Table::from_trajectory(&reference))
}
