//! Adaptive Dormand–Prince 5(4) integration onto a fixed output grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-10, abs: 1e-12 }
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights are the last row of A; these are fifth minus fourth
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates the autonomous system `ẏ = rhs(y)` and returns `y` at every
/// grid time. Steps are shortened to land exactly on grid points.
pub fn dopri5<R>(rhs: R, y0: &[f64], t_grid: &[f64], tol: Tolerance) -> Result<Vec<Vec<f64>>>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if t_grid.is_empty() {
        return Ok(Vec::new());
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Invalid("time grid must be strictly increasing".into()));
    }
    if !(tol.rel > 0.0 && tol.abs > 0.0) {
        return Err(Error::Invalid("tolerances must be positive".into()));
    }
    let n = y0.len();
    let mut out = vec![y0.to_vec()];
    let mut t = t_grid[0];
    let mut y = y0.to_vec();
    let mut k1 = rhs(&y)?;
    let mut h = 1e-3 * (t_grid[t_grid.len() - 1] - t).max(1e-3);
    let mut k = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    for &target in &t_grid[1..] {
        while t < target {
            let last = t + h >= target;
            let hs = if last { target - t } else { h };
            k[0].clone_from(&k1);
            let mut failed = false;
            for s in 1..7 {
                for i in 0..n {
                    ytmp[i] = y[i] + hs * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
                }
                match rhs(&ytmp) {
                    Ok(v) if v.iter().all(|x| x.is_finite()) => k[s] = v,
                    _ => {
                        failed = true;
                        break;
                    }
                }
            }
            let err = if failed {
                f64::INFINITY
            } else {
                // ytmp holds the fifth-order solution after stage 7
                let mut acc = 0.0;
                for i in 0..n {
                    let e = hs * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
                    let sc = tol.abs + tol.rel * y[i].abs().max(ytmp[i].abs());
                    acc += (e / sc).powi(2);
                }
                (acc / n as f64).sqrt()
            };
            if err <= 1.0 {
                t = if last { target } else { t + hs };
                y.clone_from(&ytmp);
                k1.clone_from(&k[6]);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h = hs * fac;
                }
            } else {
                let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 1.0) } else { 0.25 };
                h = hs * fac;
            }
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t, h });
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
