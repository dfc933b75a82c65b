//! Data-parallel helpers. With the `parallel` feature these run on rayon;
//! without it they fall back to plain sequential loops. Results are identical
//! either way: work is split into fixed-size chunks whose partial results are
//! combined in chunk order, independent of the thread count.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Rows per chunk for deterministic chunked reductions.
pub const REDUCE_CHUNK: usize = 1024;

/// Calls `f(row_index, row)` for every `row_len`-sized row of `data`.
pub fn for_each_row_mut<F>(data: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if row_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(row_len)
        .with_min_len(64)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// `(0..n).map(f).collect()`, possibly in parallel, order preserved.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps each fixed `chunk`-sized subrange of `0..n` and folds the partial
/// results left to right.
pub fn chunked_reduce<T, M, C>(n: usize, chunk: usize, map: M, combine: C) -> Option<T>
where
    T: Send,
    M: Fn(Range<usize>) -> T + Sync + Send,
    C: Fn(T, T) -> T,
{
    let chunk = chunk.max(1);
    let count = n.div_ceil(chunk);
    let partials = map_range(count, |c| map(c * chunk..((c + 1) * chunk).min(n)));
    partials.into_iter().reduce(combine)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_see_their_index() {
        let mut data = vec![0.0; 12];
        for_each_row_mut(&mut data, 3, |i, row| row.fill(i as f64));
        assert_eq!(data[9..], [3.0, 3.0, 3.0]);
    }

    #[test]
    fn chunked_reduce_is_ordered() {
        let s = chunked_reduce(10, 3, |r| format!("{r:?}"), |a, b| a + &b).unwrap();
        assert_eq!(s, "0..33..66..99..10");
        assert!(chunked_reduce(0, 3, |r| r.len(), |a, b| a + b).is_none());
    }
}
