use nalgebra::DVector;

use super::linalg::{orthogonal_exp, orthogonal_exp_tape, skew_dim, skew_from_coords, skew_from_coords_tape};
use super::mlp::{mlp_forward, MlpModel};
use crate::autodiff::Var;
use crate::error::{Error, Result};

/// Friction `F = −Q·diag(f̄²)·Qᵀ·v` with `Q = exp(q̂)`, where `(q̂, f̄)` are
/// the network outputs. `F·v ≤ 0` for every parameter vector.
///
/// With `antisymmetric` set, a further `n(n−1)/2` outputs give a skew matrix
/// `A` and the force becomes `−(S + A)·v`; `A` does no work.
#[derive(Debug, Clone, PartialEq)]
pub struct DissipativeForceModel {
    net: MlpModel,
    n: usize,
    antisymmetric: bool,
}

pub fn dissipative_output_dim(n: usize, antisymmetric: bool) -> usize {
    skew_dim(n) + n + if antisymmetric { skew_dim(n) } else { 0 }
}

impl DissipativeForceModel {
    pub fn new(net: MlpModel, n: usize, antisymmetric: bool) -> Result<Self> {
        let expected = dissipative_output_dim(n, antisymmetric);
        if net.arch().output != expected {
            return Err(Error::ArityMismatch { expected, got: net.arch().output });
        }
        Ok(DissipativeForceModel { net, n, antisymmetric })
    }

    pub fn net(&self) -> &MlpModel {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut MlpModel {
        &mut self.net
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn antisymmetric(&self) -> bool {
        self.antisymmetric
    }

    /// The symmetric positive semidefinite factor `S` and the optional skew part.
    pub fn matrices(&self, obs: &[f64]) -> Result<(nalgebra::DMatrix<f64>, Option<nalgebra::DMatrix<f64>>)> {
        let n = self.n;
        let k = skew_dim(n);
        let out = mlp_forward(&self.net, obs)?;
        let q = orthogonal_exp(&skew_from_coords(n, &out[..k])?);
        let d = DVector::from_iterator(n, out[k..k + n].iter().map(|f| f * f));
        let s = &q * nalgebra::DMatrix::from_diagonal(&d) * q.transpose();
        let a = if self.antisymmetric { Some(skew_from_coords(n, &out[k + n..])?) } else { None };
        Ok((s, a))
    }

    pub fn force(&self, obs: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        dissipative_force(self, obs, v)
    }

    /// Batched force on a tape: `params` is this net's `1 × P` row, `obs` is
    /// `N × input`, `v` holds `n` columns of shape `N × 1`. Returns `n` columns.
    pub fn force_tape<'t>(&self, params: Var<'t>, obs: Var<'t>, v: &[Var<'t>]) -> Vec<Var<'t>> {
        let n = self.n;
        let k = skew_dim(n);
        let out = self.net.eval_tape(params, obs);
        let q = orthogonal_exp_tape(&skew_from_coords_tape(out, 0, n), n);
        let d: Vec<Var> = (0..n).map(|i| out.col(k + i).square()).collect();
        // u = D·Qᵀ·v
        let u: Vec<Var> = (0..n)
            .map(|j| {
                let mut w = q[j] * v[0];
                for i in 1..n {
                    w = w + q[i * n + j] * v[i];
                }
                d[j] * w
            })
            .collect();
        let anti = self.antisymmetric.then(|| skew_from_coords_tape(out, k + n, n));
        (0..n)
            .map(|i| {
                let mut f = q[i * n] * u[0];
                for j in 1..n {
                    f = f + q[i * n + j] * u[j];
                }
                if let Some(a) = &anti {
                    for j in 0..n {
                        f = f + a[i * n + j] * v[j];
                    }
                }
                -f
            })
            .collect()
    }
}

pub fn dissipative_force(m: &DissipativeForceModel, obs: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != m.n {
        return Err(Error::ArityMismatch { expected: m.n, got: v.len() });
    }
    let n = m.n;
    let k = skew_dim(n);
    let out = mlp_forward(&m.net, obs)?;
    let q = orthogonal_exp(&skew_from_coords(n, &out[..k])?);
    let v = DVector::from_column_slice(v);
    let mut w = q.transpose() * &v;
    for (j, wj) in w.iter_mut().enumerate() {
        *wj *= out[k + j] * out[k + j];
    }
    let mut f = -(&q * w);
    if m.antisymmetric {
        f -= skew_from_coords(n, &out[k + n..])? * &v;
    }
    Ok(f.iter().copied().collect())
}

/// Unstructured force: the network output is the force itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RawForceModel {
    net: MlpModel,
}

impl RawForceModel {
    pub fn new(net: MlpModel) -> Self {
        RawForceModel { net }
    }

    pub fn net(&self) -> &MlpModel {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut MlpModel {
        &mut self.net
    }

    pub fn force(&self, obs: &[f64]) -> Result<Vec<f64>> {
        mlp_forward(&self.net, obs)
    }

    pub fn force_tape<'t>(&self, params: Var<'t>, obs: Var<'t>) -> Vec<Var<'t>> {
        let out = self.net.eval_tape(params, obs);
        (0..self.net.arch().output).map(|i| out.col(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::nets::mlp::{param_count, MlpArchitecture};

    fn model(n: usize, anti: bool, seed: u64) -> DissipativeForceModel {
        let arch = MlpArchitecture::new(2 * n + 1, vec![6], dissipative_output_dim(n, anti));
        DissipativeForceModel::new(MlpModel::random(arch, seed).unwrap(), n, anti).unwrap()
    }

    #[test]
    fn zero_velocity_gives_zero_force() {
        let m = model(3, false, 1);
        let f = m.force(&[0.1; 7], &[0.0; 3]).unwrap();
        assert_eq!(f, vec![0.0; 3]);
    }

    #[test]
    fn identity_factor_gives_minus_v() {
        // zero weights, biases: q̂ = 0, f̄ = 1
        let n = 3;
        let arch = MlpArchitecture::new(2, vec![], 6);
        let mut p = vec![0.0; param_count(&arch)];
        for b in &mut p[12 + 3..] {
            *b = 1.0;
        }
        let m = DissipativeForceModel::new(MlpModel::new(arch, p).unwrap(), n, false).unwrap();
        assert_eq!(m.force(&[0.5, -0.5], &[1.0, -2.0, 3.0]).unwrap(), vec![-1.0, 2.0, -3.0]);
    }

    #[test]
    fn output_width_checked() {
        let arch = MlpArchitecture::new(3, vec![], 5);
        assert!(DissipativeForceModel::new(MlpModel::random(arch, 0).unwrap(), 3, false).is_err());
    }

    #[test]
    fn matrix_factor_is_psd_and_reproduces_force() {
        let m = model(4, true, 5);
        let obs = [0.3, -0.2, 0.9, 0.1, 0.4, -0.8, 1.2, 0.5, 0.7];
        let (s, a) = m.matrices(&obs).unwrap();
        let eig = s.clone().symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|e| *e >= -1e-14));
        let v = DVector::from_column_slice(&[0.2, -1.0, 0.5, 0.3]);
        let f = -(s + a.unwrap()) * &v;
        let got = m.force(&obs, v.as_slice()).unwrap();
        for (x, y) in f.iter().zip(&got) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn tape_force_matches_numeric() {
        for n in 1..=4 {
            for anti in [false, true] {
                let m = model(n, anti, 11 + n as u64);
                let obs = vec![vec![0.3; 2 * n + 1], (0..2 * n + 1).map(|i| 0.2 * i as f64 - 0.5).collect()];
                let vs = vec![vec![1.0; n], (0..n).map(|i| 0.7 - 0.4 * i as f64).collect::<Vec<_>>()];
                let tape = Tape::new();
                let p = tape.row(m.net().params());
                let o = crate::autodiff::rows_to_var(&tape, &obs, 2 * n + 1);
                let vcols: Vec<Var> = (0..n).map(|i| tape.column(&[vs[0][i], vs[1][i]])).collect();
                let f = m.force_tape(p, o, &vcols);
                for r in 0..2 {
                    let expected = m.force(&obs[r], &vs[r]).unwrap();
                    for i in 0..n {
                        assert!((f[i].value()[[r, 0]] - expected[i]).abs() < 1e-13, "n={n} anti={anti}");
                    }
                }
            }
        }
    }
}
