//! Residual losses over observed pairs and their exact parameter gradients.
//!
//! The loss is `Σ_pairs ‖r_momentum‖² + ‖r_entropy‖²`; the velocity line of the
//! thermal scheme only defines `v` and is left out.

use crate::autodiff::{rows_to_var, value_and_input_grad, DiffScalarField, Tape, Var};
use crate::error::{Error, Result};
use crate::integrators::{residuals_flat, so3_residuals, thermal_residuals, Endpoint, ForceField, IntegratorOptions};
use crate::parallel::{map_indexed, sum_value_grad, tree_reduce, Execution, CHUNK};
use crate::state::{Layout, Pair, StateKind, TrajectoryDataset};

/// The pair `(G, F)` entering the loss and which of them carry trainable
/// parameters. The trainable vector is `[G params if learned, F params if learned]`.
#[derive(Clone, Copy)]
pub struct LossModel<'a> {
    pub g: &'a dyn DiffScalarField,
    pub f: &'a dyn ForceField,
    pub learn_g: bool,
    pub learn_f: bool,
}

impl<'a> LossModel<'a> {
    pub fn new(g: &'a dyn DiffScalarField, f: &'a dyn ForceField, learn_g: bool, learn_f: bool) -> Self {
        LossModel { g, f, learn_g, learn_f }
    }

    fn g_count(&self) -> usize {
        if self.learn_g {
            self.g.param_count()
        } else {
            0
        }
    }

    fn f_count(&self) -> usize {
        if self.learn_f {
            self.f.param_count()
        } else {
            0
        }
    }

    pub fn param_count(&self) -> usize {
        self.g_count() + self.f_count()
    }

    /// Current trainable vector.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        if self.learn_g {
            p.extend_from_slice(self.g.params());
        }
        if self.learn_f {
            p.extend(self.f.params());
        }
        p
    }
}

fn pair_sq(layout: &Layout, g: &dyn DiffScalarField, f: &dyn ForceField, p: &Pair, opts: &IntegratorOptions) -> Result<f64> {
    let r = residuals_flat(g, f, layout, &p.start, &p.end, p.h, opts)?;
    Ok(r.r_momentum.iter().chain(&r.r_entropy).map(|x| x * x).sum())
}

fn check_kind(d: &TrajectoryDataset, kind: StateKind) -> Result<()> {
    if d.layout.kind() != kind {
        return Err(Error::Invalid(format!("loss expects {kind:?} pairs, dataset holds {:?}", d.layout.kind())));
    }
    Ok(())
}

fn check_layout(d: &TrajectoryDataset, g: &dyn DiffScalarField, f: &dyn ForceField) -> Result<()> {
    if g.input_dim() != d.layout.dim() {
        return Err(Error::ArityMismatch { expected: d.layout.dim(), got: g.input_dim() });
    }
    if f.layout() != d.layout {
        return Err(Error::Invalid("force layout does not match the dataset".into()));
    }
    Ok(())
}

/// Loss with the models' current parameters, for either state kind.
pub fn loss(g: &dyn DiffScalarField, f: &dyn ForceField, d: &TrajectoryDataset, opts: &IntegratorOptions, exec: Execution) -> Result<f64> {
    check_layout(d, g, f)?;
    let chunks: Vec<&[Pair]> = d.pairs.chunks(CHUNK).collect();
    let parts = map_indexed(exec, chunks.len(), |c| -> Result<f64> {
        let terms = chunks[c].iter().map(|p| pair_sq(&d.layout, g, f, p, opts)).collect::<Result<Vec<_>>>()?;
        Ok(tree_reduce(terms, |a, b| a + b).unwrap_or(0.0))
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(tree_reduce(parts, |a, b| a + b).unwrap_or(0.0))
}

pub fn loss_thermal(g: &dyn DiffScalarField, f: &dyn ForceField, d: &TrajectoryDataset, opts: &IntegratorOptions) -> Result<f64> {
    check_kind(d, StateKind::Thermal)?;
    loss(g, f, d, opts, Execution::default())
}

pub fn loss_so3(g: &dyn DiffScalarField, f: &dyn ForceField, d: &TrajectoryDataset, opts: &IntegratorOptions) -> Result<f64> {
    check_kind(d, StateKind::Reduced)?;
    loss(g, f, d, opts, Execution::default())
}

fn check_temperatures(layout: &Layout, pairs: &[Pair]) -> Result<()> {
    for p in pairs {
        for x in [&p.start, &p.end] {
            if x.len() != layout.dim() {
                return Err(Error::ArityMismatch { expected: layout.dim(), got: x.len() });
            }
            for (channel, &value) in x[layout.t_range()].iter().enumerate() {
                if !(value > 0.0) {
                    return Err(Error::NonpositiveTemperature { channel, value });
                }
            }
        }
    }
    Ok(())
}

fn constant_columns<'t>(tape: &'t Tape, rows: &[Vec<f64>]) -> Vec<Var<'t>> {
    let width = rows.first().map_or(0, Vec::len);
    (0..width).map(|j| tape.column(&rows.iter().map(|r| r[j]).collect::<Vec<_>>())).collect()
}

/// `∇G` columns of a batch, on the tape when `G` is learned.
fn g_gradient<'t>(m: &LossModel, theta: Var<'t>, x: Var<'t>, rows: &[Vec<f64>]) -> Result<Vec<Var<'t>>> {
    let tape = x.tape();
    if m.learn_g {
        let p = theta.segment(0, 1, m.g_count());
        let (_, grad) = value_and_input_grad(m.g, p, x)?;
        Ok((0..rows[0].len()).map(|j| grad.col(j)).collect())
    } else {
        let grads = rows.iter().map(|r| Ok(m.g.value_and_grad(r)?.1)).collect::<Result<Vec<_>>>()?;
        Ok(constant_columns(tape, &grads))
    }
}

fn f_columns<'t>(m: &LossModel, theta: Var<'t>, x: Var<'t>, rows: &[Vec<f64>]) -> Result<Vec<Vec<Var<'t>>>> {
    let tape = x.tape();
    if m.learn_f {
        let p = theta.segment(m.g_count(), 1, m.f_count());
        return m.f.eval_tape(p, x);
    }
    let n_v = m.f.layout().n_v;
    let mut cols = vec![vec![Vec::with_capacity(rows.len()); n_v]; m.f.channels()];
    for r in rows {
        for (c, fc) in m.f.eval(r)?.iter().enumerate() {
            for (j, v) in fc.iter().enumerate() {
                cols[c][j].push(*v);
            }
        }
    }
    Ok(cols.iter().map(|ch| ch.iter().map(|c| tape.column(c)).collect()).collect())
}

fn endpoint_tape<'t>(m: &LossModel, layout: &Layout, theta: Var<'t>, rows: &[Vec<f64>]) -> Result<Endpoint<Var<'t>>> {
    let tape = theta.tape();
    let x = rows_to_var(tape, rows, layout.dim());
    let grad = g_gradient(m, theta, x, rows)?;
    let forces = f_columns(m, theta, x, rows)?;
    let cols = |r: std::ops::Range<usize>| r.map(|j| x.col(j)).collect::<Vec<_>>();
    Ok(Endpoint {
        q: cols(layout.q_range()),
        v: cols(layout.v_range()),
        t: cols(layout.t_range()),
        dgdq: grad[layout.q_range()].to_vec(),
        dgdv: grad[layout.v_range()].to_vec(),
        dgdt: grad[layout.t_range()].to_vec(),
        forces,
    })
}

fn chunk_loss<'t>(m: &LossModel, layout: &Layout, theta: Var<'t>, pairs: &[Pair], opts: &IntegratorOptions) -> Result<Var<'t>> {
    let tape = theta.tape();
    let starts: Vec<Vec<f64>> = pairs.iter().map(|p| p.start.clone()).collect();
    let ends: Vec<Vec<f64>> = pairs.iter().map(|p| p.end.clone()).collect();
    let a = endpoint_tape(m, layout, theta, &starts)?;
    let b = endpoint_tape(m, layout, theta, &ends)?;
    let h = tape.column(&pairs.iter().map(|p| p.h).collect::<Vec<_>>());
    let inv_h = tape.column(&pairs.iter().map(|p| 1.0 / p.h).collect::<Vec<_>>());
    let (mom, ent) = match layout.kind() {
        StateKind::Thermal => {
            let (_, mom, ent) = thermal_residuals(&a, &b, inv_h, opts);
            (mom, ent)
        }
        StateKind::Reduced => so3_residuals(&a, &b, h, inv_h, opts),
    };
    let mut total: Option<Var> = None;
    for r in mom.into_iter().chain(ent) {
        let s = r.square().sum();
        total = Some(match total {
            Some(t) => t + s,
            None => s,
        });
    }
    Ok(total.unwrap_or_else(|| tape.scalar(0.0)))
}

/// Loss and exact gradient with respect to the trainable vector `theta`.
///
/// Pairs are processed in chunks of [`CHUNK`], each on its own tape, and the
/// partial results are tree-summed, so the result is the same for any thread count.
pub fn loss_and_grad(
    m: &LossModel,
    theta: &[f64],
    d: &TrajectoryDataset,
    opts: &IntegratorOptions,
    exec: Execution,
) -> Result<(f64, Vec<f64>)> {
    check_layout(d, m.g, m.f)?;
    if theta.len() != m.param_count() {
        return Err(Error::ArityMismatch { expected: m.param_count(), got: theta.len() });
    }
    check_temperatures(&d.layout, &d.pairs)?;
    if d.pairs.is_empty() {
        return Ok((0.0, vec![0.0; theta.len()]));
    }
    let chunks: Vec<&[Pair]> = d.pairs.chunks(CHUNK).collect();
    let parts = map_indexed(exec, chunks.len(), |c| -> Result<(f64, Vec<f64>)> {
        let tape = Tape::new();
        let th = tape.row(theta);
        let l = chunk_loss(m, &d.layout, th, chunks[c], opts)?;
        let g = if theta.is_empty() { Vec::new() } else { tape.gradient(l, &[th])?[0].to_vec() };
        Ok((l.scalar(), g))
    });
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(sum_value_grad(parts))
}
