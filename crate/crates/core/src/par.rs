//! Row-level data parallelism with a sequential fallback.
//!
//! Every helper hands each task a disjoint row or index and collects the
//! results in order, so output bits do not depend on the thread count.
//! Reductions are done by the caller over the ordered per-row results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(row_index, row)` for each length-`width` row of `data`.
pub fn for_each_row<T, F>(data: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(width).enumerate().for_each(|(i, r)| f(i, r));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(width).enumerate().for_each(|(i, r)| f(i, r));
}

/// Ordered map over `0..count`.
pub fn map_indices<R, F>(count: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    return (0..count).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..count).map(f).collect();
}

/// Ordered map over a slice.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    return items.par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return items.iter().map(f).collect();
}

/// Sum of `f(row)` over rows, each row summed sequentially then combined in row order.
pub fn row_sum<T, F>(data: &[T], width: usize, f: F) -> f64
where
    T: Sync,
    F: Fn(usize, &[T]) -> f64 + Send + Sync,
{
    let rows = data.len() / width;
    map_indices(rows, |i| f(i, &data[i * width..(i + 1) * width])).iter().sum()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
