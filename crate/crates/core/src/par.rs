//! Order-preserving parallel map; sequential when the `parallel` feature
//! is off (e.g. on wasm).

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[allow(dead_code)]
/// Sum of `f(i)` over `0..n`, computed in parallel chunks.
#[cfg(feature = "parallel")]
pub fn sum_range<F>(n: u64, f: F) -> u64
where
    F: Fn(u64) -> u64 + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).sum()
}

#[cfg(not(feature = "parallel"))]
pub fn sum_range<F>(n: u64, f: F) -> u64
where
    F: Fn(u64) -> u64 + Sync + Send,
{
    (0..n).map(f).sum()
}
