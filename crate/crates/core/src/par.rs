//! Data-parallel helpers with a sequential fallback.
//!
//! Reductions split the index range into fixed-size chunks and combine the
//! partial sums in chunk order, so results are bit-identical whether or not
//! the `parallel` feature is enabled and regardless of the worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used by every reduction.
pub const CHUNK: usize = 8192;

/// Deterministic sum of `f(i)` over `0..len`.
pub fn sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partial = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(len);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<f64> = (0..chunks).into_par_iter().map(partial).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<f64> = (0..chunks).map(partial).collect();
    parts.into_iter().sum()
}

/// Deterministic maximum of `f(i)` over `0..len` (`-inf` for empty ranges).
pub fn max<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partial = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(len);
        (lo..hi).map(&f).fold(f64::NEG_INFINITY, f64::max)
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<f64> = (0..chunks).into_par_iter().map(partial).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<f64> = (0..chunks).map(partial).collect();
    parts.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Apply `f(i, &mut x[i])` to every element.
pub fn for_each_mut<T, F>(x: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    x.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let base = c * CHUNK;
        for (j, v) in chunk.iter_mut().enumerate() {
            f(base + j, v);
        }
    });
    #[cfg(not(feature = "parallel"))]
    for (i, v) in x.iter_mut().enumerate() {
        f(i, v);
    }
}

/// Apply `f(k, chunk)` to consecutive chunks of length `len`.
pub fn for_each_chunk<T, F>(x: &mut [T], len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    x.par_chunks_mut(len).enumerate().for_each(|(k, c)| f(k, c));
    #[cfg(not(feature = "parallel"))]
    x.chunks_mut(len).enumerate().for_each(|(k, c)| f(k, c));
}

/// Map `f` over `0..len`, collecting in index order.
pub fn map<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Number of workers the current pool would use.
pub fn workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_matches_sequential_order() {
        let len = 3 * CHUNK + 17;
        let f = |i: usize| ((i as f64) * 0.37).sin();
        let mut expect = 0.0;
        for c in 0..len.div_ceil(CHUNK) {
            let mut acc = 0.0;
            for i in c * CHUNK..((c + 1) * CHUNK).min(len) {
                acc += f(i);
            }
            expect += acc;
        }
        assert_eq!(sum(len, f).to_bits(), expect.to_bits());
    }

    #[test]
    fn max_and_empty() {
        assert_eq!(max(0, |_| 1.0), f64::NEG_INFINITY);
        assert_eq!(max(100_000, |i| -((i as f64) - 500.0).abs()), 0.0);
    }

    #[test]
    fn for_each_writes_index() {
        let mut v = vec![0usize; 20_000];
        for_each_mut(&mut v, |i, x| *x = i);
        assert!(v.iter().enumerate().all(|(i, &x)| i == x));
    }
}
