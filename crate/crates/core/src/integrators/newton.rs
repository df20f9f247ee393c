use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-11, max_iter: 50, max_halvings: 20 }
    }
}

fn inf_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

fn jacobian<R>(residual: &R, y: &[f64], m: usize) -> Result<DMatrix<f64>>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = y.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut yp = y.to_vec();
    for j in 0..n {
        let d = 1e-7 * y[j].abs().max(1.0);
        yp[j] = y[j] + d;
        let rp = residual(&yp)?;
        yp[j] = y[j] - d;
        let rm = residual(&yp)?;
        yp[j] = y[j];
        for i in 0..m {
            jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * d);
        }
    }
    Ok(jac)
}

/// Damped Newton iteration with a central-difference Jacobian.
///
/// After the tolerance is met one extra step is attempted and kept if it
/// does not increase the residual.
pub fn newton_solve<R>(residual: R, y0: &[f64], opts: &NewtonOptions) -> Result<Vec<f64>>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut y = y0.to_vec();
    let mut r = residual(&y)?;
    let mut norm = inf_norm(&r);
    let mut converged = false;
    for it in 0..=opts.max_iter {
        if norm < opts.tol {
            if converged {
                return Ok(y);
            }
            converged = true;
        } else if it == opts.max_iter {
            break;
        }
        let jac = jacobian(&residual, &y, r.len())?;
        let step = match jac.lu().solve(&DVector::from_column_slice(&r)) {
            Some(s) if s.iter().all(|x| x.is_finite()) => s,
            _ if converged => return Ok(y),
            _ => return Err(Error::NewtonDiverged { iterations: it, residual: norm }),
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = y.iter().zip(step.iter()).map(|(y, s)| y - alpha * s).collect();
            if let Ok(rt) = residual(&trial) {
                let nt = inf_norm(&rt);
                if nt < norm || (converged && nt <= norm) {
                    y = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            if converged {
                return Ok(y);
            }
            return Err(Error::NewtonDiverged { iterations: it + 1, residual: norm });
        }
        if converged {
            return Ok(y);
        }
    }
    Err(Error::NewtonDiverged { iterations: opts.max_iter, residual: norm })
}
