//! Thin layer over rayon so every data-parallel loop has a sequential
//! fallback when the `parallel` feature is off.
//!
//! All helpers are deterministic: element-wise work is independent of the
//! schedule, and reductions go through fixed-size chunks whose partial
//! results are combined in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used by [`sum_by`] for its partial sums.
const REDUCE_CHUNK: usize = 4096;

pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n).map(f).collect();
}

/// Sum of `f(x)` over `data`, bit-identical regardless of thread count.
pub fn sum_by<T, F>(data: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Send + Sync,
{
    let partial = |c: &[T]| c.iter().map(&f).sum::<f64>();
    #[cfg(feature = "parallel")]
    let parts: Vec<f64> = data.par_chunks(REDUCE_CHUNK).map(partial).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<f64> = data.chunks(REDUCE_CHUNK).map(partial).collect();
    parts.into_iter().sum()
}
