//! Data-parallel helpers with a serial fallback.
//!
//! Work is split into fixed-size chunks and partial results are combined by a
//! fixed pairwise tree, so results do not depend on the thread count or on
//! whether the `parallel` feature is enabled.

use serde::{Deserialize, Serialize};

/// Pairs per chunk in loss evaluation.
pub const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// `(0..n).map(f)` in index order, possibly on the rayon pool.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Pairwise tree reduction with a fixed shape for a given length.
pub fn tree_reduce<T, F>(mut items: Vec<T>, combine: F) -> Option<T>
where
    F: Fn(T, T) -> T,
{
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop()
}

/// Tree sum of `(value, gradient)` partials.
pub fn sum_value_grad(parts: Vec<(f64, Vec<f64>)>) -> (f64, Vec<f64>) {
    tree_reduce(parts, |(la, mut ga), (lb, gb)| {
        ga.iter_mut().zip(&gb).for_each(|(a, b)| *a += b);
        (la + lb, ga)
    })
    .unwrap_or((0.0, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        for exec in [Execution::Serial, Execution::Parallel] {
            assert_eq!(map_indexed(exec, 5, |i| i * i), vec![0, 1, 4, 9, 16]);
        }
    }

    #[test]
    fn tree_shape() {
        let s = tree_reduce((1..=5).map(|i| i.to_string()).collect(), |a, b| format!("({a}+{b})"));
        assert_eq!(s.unwrap(), "(((1+2)+(3+4))+5)");
        assert_eq!(tree_reduce(Vec::<i32>::new(), |a, b| a + b), None);
    }
}
