use super::{EntropyVelocity, IntegratorOptions};
use crate::autodiff::Scalar;

/// Everything the residuals need at one end of an interval.
#[derive(Debug, Clone)]
pub struct Endpoint<S> {
    pub q: Vec<S>,
    pub v: Vec<S>,
    pub t: Vec<S>,
    pub dgdq: Vec<S>,
    pub dgdv: Vec<S>,
    pub dgdt: Vec<S>,
    /// Per channel, over the velocity block.
    pub forces: Vec<Vec<S>>,
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = a[0] * b[0];
    for k in 1..a.len() {
        acc = acc + a[k] * b[k];
    }
    acc
}

fn total_force<S: Scalar>(e: &Endpoint<S>, j: usize) -> S {
    let mut f = e.forces[0][j];
    for ch in &e.forces[1..] {
        f = f + ch[j];
    }
    f
}

/// `(r_velocity, r_momentum, r_entropy)` of the thermal scheme.
pub fn thermal_residuals<S: Scalar>(
    a: &Endpoint<S>,
    b: &Endpoint<S>,
    inv_h: S,
    opts: &IntegratorOptions,
) -> (Vec<S>, Vec<S>, Vec<S>) {
    let n = a.q.len();
    let r_vel: Vec<S> = (0..n).map(|j| (b.q[j] - a.q[j]) * inv_h - a.v[j]).collect();
    let r_mom = (0..n)
        .map(|j| {
            let f = if opts.force_midpoint {
                (total_force(a, j) + total_force(b, j)).scale(0.5)
            } else {
                total_force(b, j)
            };
            (b.dgdv[j] - a.dgdv[j]) * inv_h - b.dgdq[j] - f
        })
        .collect();
    let vel: Vec<S> = match opts.entropy_velocity {
        EntropyVelocity::State => a.v.clone(),
        EntropyVelocity::Difference => (0..n).map(|j| (b.q[j] - a.q[j]) * inv_h).collect(),
    };
    let r_ent = (0..a.t.len())
        .map(|i| a.t[i] * inv_h * (b.dgdt[i] - a.dgdt[i]) + dot(&a.forces[i], &vel))
        .collect();
    (r_vel, r_mom, r_ent)
}

fn cross<S: Scalar>(a: &[S], b: &[S]) -> [S; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `(r_momentum, r_entropy)` of the reduced rigid-body scheme, with `M = ∂G/∂Ω`:
///
/// ```text
/// r_mom = (M_b − M_a)/h + ½(M_b×Ω_b + M_a×Ω_a) + (h/4)((Ω_b·M_b)Ω_b − (Ω_a·M_a)Ω_a) − f_b
/// r_ent = (S_b − S_a)/h + (Ω_a·f_a)/T_a
/// ```
pub fn so3_residuals<S: Scalar>(
    a: &Endpoint<S>,
    b: &Endpoint<S>,
    h: S,
    inv_h: S,
    opts: &IntegratorOptions,
) -> (Vec<S>, Vec<S>) {
    let (wa, wb) = (&a.v, &b.v);
    let (ma, mb) = (&a.dgdv, &b.dgdv);
    let ca = cross(ma, wa);
    let cb = cross(mb, wb);
    let pa = dot(wa, ma);
    let pb = dot(wb, mb);
    let r_mom = (0..3)
        .map(|j| {
            let f = if opts.force_midpoint {
                (total_force(a, j) + total_force(b, j)).scale(0.5)
            } else {
                total_force(b, j)
            };
            (mb[j] - ma[j]) * inv_h + (cb[j] + ca[j]).scale(0.5) + h.scale(0.25) * (pb * wb[j] - pa * wa[j]) - f
        })
        .collect();
    let r_ent = (0..a.t.len())
        .map(|i| (b.dgdt[i] - a.dgdt[i]) * inv_h + dot(wa, &a.forces[i]) / a.t[i])
        .collect();
    (r_mom, r_ent)
}
