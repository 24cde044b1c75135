//! Data-parallel helpers with a sequential fallback.
//!
//! Reductions are split into fixed chunks of [`CHUNK`] elements. Each chunk is
//! summed left to right and the chunk sums are folded left to right, so the
//! floating point result depends only on the input order, never on how many
//! workers took part.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const CHUNK: usize = 2048;

/// Deterministic sum of `f(x)` over `xs`.
pub fn sum_map<F>(xs: &[f64], f: F) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    #[cfg(feature = "parallel")]
    let partials: Vec<f64> = xs
        .par_chunks(CHUNK)
        .map(|c| c.iter().fold(0.0, |acc, &x| acc + f(x)))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<f64> = xs
        .chunks(CHUNK)
        .map(|c| c.iter().fold(0.0, |acc, &x| acc + f(x)))
        .collect();
    partials.iter().fold(0.0, |acc, &s| acc + s)
}

pub fn sum(xs: &[f64]) -> f64 {
    sum_map(xs, |x| x)
}

/// Deterministic mean of `f(x)`; `xs` must be non-empty.
pub fn mean_map<F>(xs: &[f64], f: F) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    sum_map(xs, f) / xs.len() as f64
}

/// Deterministic sum of `f(i)` for `i in 0..n`.
pub fn sum_index<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let chunk_sum = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        (lo..hi).fold(0.0, |acc, i| acc + f(i))
    };
    #[cfg(feature = "parallel")]
    let partials: Vec<f64> = (0..chunks).into_par_iter().map(chunk_sum).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<f64> = (0..chunks).map(chunk_sum).collect();
    partials.iter().fold(0.0, |acc, &s| acc + s)
}

/// Deterministic mean of `f(i)` for `i in 0..n`; `n` must be positive.
pub fn mean_index<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    sum_index(n, f) / n as f64
}

/// Applies `f(i, &mut x)` to every element.
pub fn for_each_indexed<T, F>(xs: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    xs.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    #[cfg(not(feature = "parallel"))]
    xs.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Maps `0..n` through `f`, preserving order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n).map(f).collect();
}

/// Order-preserving fallible map over `0..n`; returns the first error by index.
pub fn try_map_range<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_range(n, f).into_iter().collect()
}

/// Deterministic maximum of `f(i)` over `0..n` (NaN-free inputs assumed).
pub fn max_index<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_range(n, f).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_independent_of_pool_size() {
        let xs: Vec<f64> = (0..50_000).map(|i| ((i as f64) * 0.37).sin() * 1e3).collect();
        let reference = sum(&xs);
        for threads in [1, 2, 3, 8] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let s = pool.install(|| sum(&xs));
            assert_eq!(s.to_bits(), reference.to_bits());
        }
    }

    #[test]
    fn sum_index_matches_sum_map() {
        let xs: Vec<f64> = (0..10_001).map(|i| i as f64 * 0.5).collect();
        assert_eq!(sum(&xs).to_bits(), sum_index(xs.len(), |i| xs[i]).to_bits());
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(sum(&[]), 0.0);
        assert_eq!(sum_index(0, |_| 1.0), 0.0);
    }
}
