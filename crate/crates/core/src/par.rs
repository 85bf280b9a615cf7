//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these fan out over rayon's pool;
//! without it they run on the calling thread. Results are always returned
//! in index order and every reduction used by the crate is order-independent,
//! so output never depends on the worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(i)` for `i in 0..n`, collected in index order.
#[cfg(feature = "parallel")]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Maps a slice, preserving order.
#[cfg(feature = "parallel")]
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Folds `f(i)` over `0..n` into per-worker accumulators and merges them.
///
/// `merge` must be associative and commutative for the result to be
/// independent of scheduling.
#[cfg(feature = "parallel")]
pub fn fold_range<A, F, M>(n: u64, init: A, f: F, merge: M) -> A
where
    A: Clone + Send + Sync,
    F: Fn(&mut A, u64) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .fold(
            || init.clone(),
            |mut acc, i| {
                f(&mut acc, i);
                acc
            },
        )
        .reduce(|| init.clone(), &merge)
}

#[cfg(not(feature = "parallel"))]
pub fn fold_range<A, F, M>(n: u64, init: A, f: F, merge: M) -> A
where
    A: Clone + Send + Sync,
    F: Fn(&mut A, u64) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    let _ = &merge;
    let mut acc = init;
    for i in 0..n {
        f(&mut acc, i);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(100, |i| i * i);
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn fold_range_sums() {
        let s = fold_range(1000, 0u64, |a, i| *a += i, |a, b| a + b);
        assert_eq!(s, 999 * 1000 / 2);
    }
}
