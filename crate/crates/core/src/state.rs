//! States, datasets, and the phase → observable map.
//!
//! Observable vectors are stored flat as `[q.., v.., T..]`; a [`Layout`] says
//! how many entries of each block there are. Reduced (rigid-body) states have
//! no coordinates and use the body angular velocity as the velocity block.

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autodiff::DiffScalarField;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Thermal,
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_q: usize,
    pub n_v: usize,
    pub n_t: usize,
}

impl Layout {
    pub fn thermal(n_q: usize, n_t: usize) -> Self {
        Layout { n_q, n_v: n_q, n_t }
    }

    pub fn reduced() -> Self {
        Layout { n_q: 0, n_v: 3, n_t: 1 }
    }

    pub fn kind(&self) -> StateKind {
        if self.n_q == 0 {
            StateKind::Reduced
        } else {
            StateKind::Thermal
        }
    }

    pub fn dim(&self) -> usize {
        self.n_q + self.n_v + self.n_t
    }

    pub fn q_range(&self) -> Range<usize> {
        0..self.n_q
    }

    pub fn v_range(&self) -> Range<usize> {
        self.n_q..self.n_q + self.n_v
    }

    pub fn t_range(&self) -> Range<usize> {
        self.n_q + self.n_v..self.dim()
    }
}

fn check_temperatures(t: &[f64]) -> Result<()> {
    for (channel, &value) in t.iter().enumerate() {
        // also rejects NaN
        if !(value > 0.0) {
            return Err(Error::NonpositiveTemperature { channel, value });
        }
    }
    Ok(())
}

fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

/// Canonical state `(q, p, S₁..S_P)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub s: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::ArityMismatch { expected: q.len(), got: p.len() });
        }
        if s.is_empty() {
            return Err(Error::Invalid("at least one entropy is required".into()));
        }
        if !(all_finite(&q) && all_finite(&p) && all_finite(&s)) {
            return Err(Error::Invalid("nonfinite phase state".into()));
        }
        Ok(PhaseState { q, p, s })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.q.clone();
        out.extend_from_slice(&self.p);
        out.extend_from_slice(&self.s);
        out
    }

    pub fn from_slice(n_q: usize, y: &[f64]) -> Result<Self> {
        Self::new(y[..n_q].to_vec(), y[n_q..2 * n_q].to_vec(), y[2 * n_q..].to_vec())
    }
}

/// Measurable state `(q, v, T₁..T_P)`; temperatures are positive by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableState {
    q: Vec<f64>,
    v: Vec<f64>,
    t: Vec<f64>,
}

impl ObservableState {
    pub fn new(q: Vec<f64>, v: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        if q.len() != v.len() {
            return Err(Error::ArityMismatch { expected: q.len(), got: v.len() });
        }
        if t.is_empty() {
            return Err(Error::Invalid("at least one temperature is required".into()));
        }
        check_temperatures(&t)?;
        Ok(ObservableState { q, v, t })
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn layout(&self) -> Layout {
        Layout::thermal(self.q.len(), self.t.len())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.q.clone();
        out.extend_from_slice(&self.v);
        out.extend_from_slice(&self.t);
        out
    }

    pub fn from_slice(layout: Layout, x: &[f64]) -> Result<Self> {
        if x.len() != layout.dim() {
            return Err(Error::ArityMismatch { expected: layout.dim(), got: x.len() });
        }
        Self::new(
            x[layout.q_range()].to_vec(),
            x[layout.v_range()].to_vec(),
            x[layout.t_range()].to_vec(),
        )
    }
}

/// Reduced rigid-body observable: body angular velocity and temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedObservable {
    omega: [f64; 3],
    t: f64,
}

impl ReducedObservable {
    pub fn new(omega: [f64; 3], t: f64) -> Result<Self> {
        check_temperatures(&[t])?;
        Ok(ReducedObservable { omega, t })
    }

    pub fn omega(&self) -> [f64; 3] {
        self.omega
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.omega[0], self.omega[1], self.omega[2], self.t]
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != 4 {
            return Err(Error::ArityMismatch { expected: 4, got: x.len() });
        }
        Self::new([x[0], x[1], x[2]], x[3])
    }
}

/// Reduced rigid-body phase state: body angular momentum and entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedPhase {
    pub mu: [f64; 3],
    pub s: f64,
}

impl ReducedPhase {
    pub fn new(mu: [f64; 3], s: f64) -> Result<Self> {
        if !(all_finite(&mu) && s.is_finite()) {
            return Err(Error::Invalid("nonfinite reduced phase state".into()));
        }
        Ok(ReducedPhase { mu, s })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.mu[0], self.mu[1], self.mu[2], self.s]
    }
}

/// `(q, ∂H/∂p, ∂H/∂S)` for a Hamiltonian laid out over `(q, p, S)`.
pub fn observable_from_phase<H: DiffScalarField + ?Sized>(h: &H, s: &PhaseState) -> Result<ObservableState> {
    let x = s.to_vec();
    let (_, g) = h.value_and_grad(&x)?;
    let n = s.q.len();
    ObservableState::new(s.q.clone(), g[n..2 * n].to_vec(), g[2 * n..].to_vec())
}

/// `(∂h/∂μ, ∂h/∂S)` for a reduced Hamiltonian laid out over `(μ, S)`.
pub fn observable_from_reduced_phase<H: DiffScalarField + ?Sized>(
    h: &H,
    s: &ReducedPhase,
) -> Result<ReducedObservable> {
    let (_, g) = h.value_and_grad(&s.to_vec())?;
    ReducedObservable::new([g[0], g[1], g[2]], g[3])
}

/// One observed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub traj_id: usize,
    pub h: f64,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub system: String,
    pub kind: StateKind,
    pub layout: Layout,
    pub n_traj: usize,
    pub traj_len: usize,
    pub h: f64,
    pub rtol: f64,
    pub atol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub layout: Layout,
    pub pairs: Vec<Pair>,
    pub meta: DatasetMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Dimension,
    NonpositiveStep,
    NonpositiveTemperature,
    Nonfinite,
    Chain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub rule: Rule,
    pub detail: String,
}

/// Checks every dataset invariant; an empty list means the dataset is valid.
pub fn validate_dataset(d: &TrajectoryDataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let dim = d.layout.dim();
    let mut push = |index, rule, detail: String| out.push(Violation { index, rule, detail });
    for (i, pair) in d.pairs.iter().enumerate() {
        if pair.start.len() != dim || pair.end.len() != dim {
            push(i, Rule::Dimension, format!("expected {dim} entries per state"));
            continue;
        }
        if !(pair.h > 0.0) {
            push(i, Rule::NonpositiveStep, format!("h = {}", pair.h));
        }
        if !(all_finite(&pair.start) && all_finite(&pair.end)) {
            push(i, Rule::Nonfinite, "nonfinite entry".into());
        }
        let tr = d.layout.t_range();
        if pair.start[tr.clone()].iter().chain(&pair.end[tr]).any(|t| !(*t > 0.0)) {
            push(i, Rule::NonpositiveTemperature, "temperature must be > 0".into());
        }
    }
    for i in 1..d.pairs.len() {
        let (prev, cur) = (&d.pairs[i - 1], &d.pairs[i]);
        if prev.traj_id == cur.traj_id && prev.end.len() == dim && prev.end != cur.start {
            push(i, Rule::Chain, format!("pair does not start where pair {} ended", i - 1));
        }
    }
    out
}

fn column_names(layout: &Layout) -> Vec<String> {
    let mut names = vec!["traj_id".to_string(), "h".to_string()];
    for end in ["0", "f"] {
        for (block, n) in [("q", layout.n_q), ("v", layout.n_v), ("T", layout.n_t)] {
            for j in 0..n {
                names.push(format!("{block}{end}_{j}"));
            }
        }
    }
    names
}

/// Sibling metadata path: `data.csv` → `data.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

impl TrajectoryDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(column_names(&self.layout))?;
        for p in &self.pairs {
            let mut rec = vec![p.traj_id.to_string(), p.h.to_string()];
            rec.extend(p.start.iter().chain(&p.end).map(|x| x.to_string()));
            w.write_record(rec)?;
        }
        w.flush()?;
        std::fs::write(meta_path(path), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let meta: DatasetMeta = serde_json::from_str(&std::fs::read_to_string(meta_path(path))?)?;
        let layout = meta.layout;
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if header != column_names(&layout) {
            return Err(Error::Invalid(format!("unexpected dataset header {header:?}")));
        }
        let dim = layout.dim();
        let mut pairs = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|e| Error::Invalid(format!("bad number {s:?}: {e}")))
            };
            let traj_id = rec[0]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Invalid(format!("bad traj_id: {e}")))?;
            let h = parse(&rec[1])?;
            let vals: Vec<f64> = rec.iter().skip(2).map(parse).collect::<Result<_>>()?;
            pairs.push(Pair {
                traj_id,
                h,
                start: vals[..dim].to_vec(),
                end: vals[dim..].to_vec(),
            });
        }
        Ok(TrajectoryDataset { layout, pairs, meta })
    }
}
