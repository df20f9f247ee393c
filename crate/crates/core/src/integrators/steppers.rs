use super::newton::{newton_solve, NewtonOptions};
use super::residual::{so3_residuals, thermal_residuals, Endpoint};
use super::{ForceField, IntegratorOptions, ResidualReport};
use crate::autodiff::DiffScalarField;
use crate::error::{Error, Result};
use crate::state::{Layout, ObservableState, PhaseState, ReducedObservable, StateKind};

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Invalid(format!("step size must be positive, got {h}")));
    }
    Ok(())
}

fn check_temperatures(layout: &Layout, x: &[f64]) -> Result<()> {
    for (channel, &value) in x[layout.t_range()].iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonpositiveTemperature { channel, value });
        }
    }
    Ok(())
}

/// Field value and the residual ingredients at the observable `x`.
pub fn endpoint<G, F>(g: &G, f: &F, layout: &Layout, x: &[f64]) -> Result<(f64, Endpoint<f64>)>
where
    G: DiffScalarField + ?Sized,
    F: ForceField + ?Sized,
{
    if x.len() != layout.dim() {
        return Err(Error::ArityMismatch { expected: layout.dim(), got: x.len() });
    }
    check_temperatures(layout, x)?;
    let (val, grad) = g.value_and_grad(x)?;
    let forces = f.eval(x)?;
    if forces.len() != layout.n_t {
        return Err(Error::ArityMismatch { expected: layout.n_t, got: forces.len() });
    }
    Ok((
        val,
        Endpoint {
            q: x[layout.q_range()].to_vec(),
            v: x[layout.v_range()].to_vec(),
            t: x[layout.t_range()].to_vec(),
            dgdq: grad[layout.q_range()].to_vec(),
            dgdv: grad[layout.v_range()].to_vec(),
            dgdt: grad[layout.t_range()].to_vec(),
            forces,
        },
    ))
}

/// Total energy `∂G/∂v·v + T·∂G/∂T − G`.
pub fn energy<G: DiffScalarField + ?Sized>(g: &G, layout: &Layout, x: &[f64]) -> Result<f64> {
    let (val, grad) = g.value_and_grad(x)?;
    let mut e = -val;
    for j in layout.v_range().chain(layout.t_range()) {
        e += grad[j] * x[j];
    }
    Ok(e)
}

fn report(layout: &Layout, a: &Endpoint<f64>, b: &Endpoint<f64>, h: f64, opts: &IntegratorOptions) -> ResidualReport {
    match layout.kind() {
        StateKind::Thermal => {
            let (r_velocity, r_momentum, r_entropy) = thermal_residuals(a, b, 1.0 / h, opts);
            ResidualReport { r_momentum, r_entropy, r_velocity }
        }
        StateKind::Reduced => {
            let (r_momentum, r_entropy) = so3_residuals(a, b, h, 1.0 / h, opts);
            ResidualReport { r_momentum, r_entropy, r_velocity: Vec::new() }
        }
    }
}

/// Residuals between two flat observable vectors of the same layout.
pub fn residuals_flat<G, F>(
    g: &G,
    f: &F,
    layout: &Layout,
    xa: &[f64],
    xb: &[f64],
    h: f64,
    opts: &IntegratorOptions,
) -> Result<ResidualReport>
where
    G: DiffScalarField + ?Sized,
    F: ForceField + ?Sized,
{
    check_h(h)?;
    let (_, a) = endpoint(g, f, layout, xa)?;
    let (_, b) = endpoint(g, f, layout, xb)?;
    Ok(report(layout, &a, &b, h, opts))
}

pub fn residuals_thermal<G, F>(
    g: &G,
    f: &F,
    a: &ObservableState,
    b: &ObservableState,
    h: f64,
    opts: &IntegratorOptions,
) -> Result<ResidualReport>
where
    G: DiffScalarField + ?Sized,
    F: ForceField + ?Sized,
{
    residuals_flat(g, f, &a.layout(), &a.to_vec(), &b.to_vec(), h, opts)
}

pub fn residuals_so3<G, F>(
    g: &G,
    f: &F,
    a: &ReducedObservable,
    b: &ReducedObservable,
    h: f64,
    opts: &IntegratorOptions,
) -> Result<ResidualReport>
where
    G: DiffScalarField + ?Sized,
    F: ForceField + ?Sized,
{
    residuals_flat(g, f, &Layout::reduced(), &a.to_vec(), &b.to_vec(), h, opts)
}

/// One implicit step from the flat observable `xa`.
///
/// Thermal: `q_b = q_a + h·v_a`, then Newton on `(v_b, T_b)`.
/// Reduced: Newton on `(Ω_b, T_b)`.
pub fn step_flat<G, F>(g: &G, f: &F, layout: &Layout, xa: &[f64], h: f64, opts: &IntegratorOptions) -> Result<Vec<f64>>
where
    G: DiffScalarField + ?Sized,
    F: ForceField + ?Sized,
{
    check_h(h)?;
    let (_, a) = endpoint(g, f, layout, xa)?;
    let qb: Vec<f64> = a.q.iter().zip(&a.v).map(|(q, v)| q + h * v).collect();
    let nq = layout.n_q;
    let kind = layout.kind();
    let assemble = |y: &[f64]| {
        let mut x = qb.clone();
        x.extend_from_slice(y);
        x
    };
    let residual = |y: &[f64]| -> Result<Vec<f64>> {
        let (_, b) = endpoint(g, f, layout, &assemble(y))?;
        let mut r = match kind {
            StateKind::Thermal => {
                let (_, mom, ent) = thermal_residuals(&a, &b, 1.0 / h, opts);
                [mom, ent]
            }
            StateKind::Reduced => {
                let (mom, ent) = so3_residuals(&a, &b, h, 1.0 / h, opts);
                [mom, ent]
            }
        };
        let mut out = std::mem::take(&mut r[0]);
        out.append(&mut r[1]);
        Ok(out)
    };
    let nopts = NewtonOptions { tol: opts.newton_tol, max_iter: opts.max_iter, ..Default::default() };
    let y = newton_solve(residual, &xa[nq..], &nopts)?;
    Ok(assemble(&y))
}

pub fn step_thermal<G, F>(g: &G, f: &F, a: &ObservableState, h: f64, opts: &IntegratorOptions) -> Result<ObservableState>
where
    G: DiffScalarField + ?Sized,
    F: ForceField + ?Sized,
{
    let layout = a.layout();
    ObservableState::from_slice(layout, &step_flat(g, f, &layout, &a.to_vec(), h, opts)?)
}

pub fn step_so3<G, F>(g: &G, f: &F, a: &ReducedObservable, h: f64, opts: &IntegratorOptions) -> Result<ReducedObservable>
where
    G: DiffScalarField + ?Sized,
    F: ForceField + ?Sized,
{
    ReducedObservable::from_slice(&step_flat(g, f, &Layout::reduced(), &a.to_vec(), h, opts)?)
}

/// One step of the canonical scheme for `H(q, p, S)`, implicit in `p_{k+1}` only.
///
/// Derivatives of `H` are taken at `(q_k, p_{k+1}, S_k)`; the forces see the
/// observable `(q_k, v_k, T_k)` formed from those derivatives.
pub fn step_canonical<H, F>(hf: &H, f: &F, a: &PhaseState, h: f64, opts: &IntegratorOptions) -> Result<PhaseState>
where
    H: DiffScalarField + ?Sized,
    F: ForceField + ?Sized,
{
    check_h(h)?;
    let n = a.q.len();
    let np = a.s.len();
    let layout = Layout::thermal(n, np);
    if f.layout() != layout {
        return Err(Error::Invalid("force layout does not match the phase state".into()));
    }
    // observable at (q_k, p, S_k) and ∂H/∂q there
    let eval = |p: &[f64]| -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
        let mut z = a.q.clone();
        z.extend_from_slice(p);
        z.extend_from_slice(&a.s);
        let (_, grad) = hf.value_and_grad(&z)?;
        let mut obs = a.q.clone();
        obs.extend_from_slice(&grad[n..]);
        check_temperatures(&layout, &obs)?;
        let forces = f.eval(&obs)?;
        Ok((obs, grad[..n].to_vec(), forces))
    };
    let residual = |p: &[f64]| -> Result<Vec<f64>> {
        let (_, dhdq, forces) = eval(p)?;
        Ok((0..n)
            .map(|j| (p[j] - a.p[j]) / h + dhdq[j] - forces.iter().map(|fc| fc[j]).sum::<f64>())
            .collect())
    };
    let nopts = NewtonOptions { tol: opts.newton_tol, max_iter: opts.max_iter, ..Default::default() };
    let p1 = newton_solve(residual, &a.p, &nopts)?;
    let (obs, _, forces) = eval(&p1)?;
    let v = &obs[layout.v_range()];
    let t = &obs[layout.t_range()];
    let q1 = (0..n).map(|j| a.q[j] + h * v[j]).collect();
    let s1 = (0..np)
        .map(|i| {
            let work: f64 = forces[i].iter().zip(v).map(|(f, v)| f * v).sum();
            a.s[i] - h * work / t[i]
        })
        .collect();
    PhaseState::new(q1, p1, s1)
}
