//! Skew-symmetric matrices and their exponentials, numerically and on a tape.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::autodiff::Var;
use crate::error::{Error, Result};

/// Number of independent entries of an `n × n` skew matrix.
pub fn skew_dim(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// `Σ_{i<j} c_ij E_ij` with coordinates in lexicographic `(i, j)` order.
pub fn skew_from_coords(n: usize, c: &[f64]) -> Result<DMatrix<f64>> {
    if c.len() != skew_dim(n) {
        return Err(Error::ArityMismatch { expected: skew_dim(n), got: c.len() });
    }
    let mut a = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            a[(i, j)] = c[k];
            a[(j, i)] = -c[k];
            k += 1;
        }
    }
    Ok(a)
}

fn taylor_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a / 2f64.powi(squarings);
    let id = DMatrix::<f64>::identity(n, n);
    let mut p = id.clone();
    for k in (1..=18).rev() {
        p = &id + &b * p / k as f64;
    }
    for _ in 0..squarings {
        p = &p * &p;
    }
    p
}

/// Rotation from an axis-angle vector.
pub fn rodrigues(w: &Vector3<f64>) -> Matrix3<f64> {
    let th2 = w.norm_squared();
    let (s, c) = if th2 < 1e-8 {
        (1.0 - th2 / 6.0 + th2 * th2 / 120.0, 0.5 - th2 / 24.0 + th2 * th2 / 720.0)
    } else {
        let th = th2.sqrt();
        (th.sin() / th, (1.0 - th.cos()) / th2)
    };
    let k = w.cross_matrix();
    Matrix3::identity() + k * s + k * k * c
}

/// `e^A` for a skew matrix; only the antisymmetric part of `a` is used.
pub fn orthogonal_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "orthogonal_exp needs a square matrix");
    let a = (a - a.transpose()) * 0.5;
    match n {
        0 => DMatrix::zeros(0, 0),
        1 => DMatrix::identity(1, 1),
        2 => {
            let (s, c) = a[(0, 1)].sin_cos();
            DMatrix::from_row_slice(2, 2, &[c, s, -s, c])
        }
        3 => {
            // a = hat(w) with w = (a32, a13, a21)
            let w = Vector3::new(a[(2, 1)], a[(0, 2)], a[(1, 0)]);
            let r = rodrigues(&w);
            DMatrix::from_iterator(3, 3, r.iter().copied())
        }
        _ => taylor_exp(&a),
    }
}

pub fn hat(w: [f64; 3]) -> Matrix3<f64> {
    Vector3::from(w).cross_matrix()
}

pub fn vee(a: &Matrix3<f64>) -> Result<[f64; 3]> {
    let dev = (a + a.transpose()).abs().max();
    if dev > 1e-12 {
        return Err(Error::NotSkew(dev));
    }
    Ok([a[(2, 1)], a[(0, 2)], a[(1, 0)]])
}

/// Square matrix of per-sample columns: entry `(i, j)` is an `N × 1` var, row-major.
pub type BatchMatrix<'t> = Vec<Var<'t>>;

fn batch_mul<'t>(a: &[Var<'t>], b: &[Var<'t>], n: usize) -> BatchMatrix<'t> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = a[i * n] * b[j];
            for k in 1..n {
                acc = acc + a[i * n + k] * b[k * n + j];
            }
            out.push(acc);
        }
    }
    out
}

/// Batched skew matrices from an `N × n(n−1)/2` coordinate block starting at column `start`.
pub fn skew_from_coords_tape<'t>(coords: Var<'t>, start: usize, n: usize) -> BatchMatrix<'t> {
    let rows = coords.shape().0;
    let zero = coords.tape().zeros(rows, 1);
    let mut m = vec![zero; n * n];
    let mut k = start;
    for i in 0..n {
        for j in i + 1..n {
            let c = coords.col(k);
            m[i * n + j] = c;
            m[j * n + i] = -c;
            k += 1;
        }
    }
    m
}

/// Batched `e^A` for skew `A`: closed form for `n ≤ 2`, scaled Taylor with squaring otherwise.
///
/// The scaling exponent is chosen from the largest norm in the batch and is
/// piecewise constant, so it does not enter the derivative.
pub fn orthogonal_exp_tape<'t>(a: &[Var<'t>], n: usize) -> BatchMatrix<'t> {
    assert_eq!(a.len(), n * n);
    let tape = a[0].tape();
    let rows = a[0].shape().0;
    match n {
        1 => vec![tape.zeros(rows, 1).offset(1.0)],
        2 => {
            let c = a[1];
            let (s, co) = (c.sin(), c.cos());
            vec![co, s, -s, co]
        }
        _ => {
            let vals: Vec<_> = a.iter().map(|x| x.value()).collect();
            let mut norm: f64 = 0.0;
            for r in 0..rows {
                for j in 0..n {
                    let col: f64 = (0..n).map(|i| vals[i * n + j][[r, 0]].abs()).sum();
                    norm = norm.max(col);
                }
            }
            let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
            let b: BatchMatrix = a.iter().map(|x| x.scale(0.5f64.powi(squarings))).collect();
            let zero = tape.zeros(rows, 1);
            let mut p: BatchMatrix = (0..n * n)
                .map(|k| if k % (n + 1) == 0 { zero.offset(1.0) } else { zero })
                .collect();
            for k in (1..=14).rev() {
                let bp = batch_mul(&b, &p, n);
                p = bp
                    .into_iter()
                    .enumerate()
                    .map(|(idx, x)| {
                        let x = x.scale(1.0 / k as f64);
                        if idx % (n + 1) == 0 {
                            x.offset(1.0)
                        } else {
                            x
                        }
                    })
                    .collect();
            }
            for _ in 0..squarings {
                p = batch_mul(&p, &p, n);
            }
            p
        }
    }
}
