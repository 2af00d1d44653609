//! Order-deterministic execution of embarrassingly parallel loops.
//!
//! Per-item results are collected by index and every floating-point
//! reduction runs in a fixed sequential order, so outputs are bit-identical
//! for any rayon worker count and for the sequential fallback built without
//! the `parallel` feature.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, collecting results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
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

/// Sequential reference implementation of [`map_indexed`], kept callable for
/// benchmark comparisons against the parallel path.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Sum `f(i)` over `0..n`. The per-item values may be computed in parallel;
/// the summation itself is always sequential in index order.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_indexed(n, f).into_iter().sum()
}

/// Fold `0..n` into an accumulator through fixed-size chunks.
///
/// Each chunk is folded sequentially with `step`, chunk accumulators are
/// merged in chunk order with `merge`. Chunk boundaries depend only on
/// `chunk_size`, never on the worker count, and both the parallel and
/// sequential paths perform identical arithmetic in identical order.
pub fn fold_chunked<A, I, S, M>(n: usize, chunk_size: usize, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    S: Fn(&mut A, usize) + Sync + Send,
    M: Fn(A, A) -> A,
{
    assert!(chunk_size > 0, "chunk_size must be positive");
    let n_chunks = n.div_ceil(chunk_size);
    let fold_one = |c: usize| {
        let mut acc = init();
        let lo = c * chunk_size;
        let hi = ((c + 1) * chunk_size).min(n);
        for i in lo..hi {
            step(&mut acc, i);
        }
        acc
    };
    let partials = map_indexed(n_chunks, fold_one);
    let mut it = partials.into_iter();
    match it.next() {
        None => init(),
        Some(first) => it.fold(first, merge),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_matches_sequential() {
        let par = map_indexed(1000, |i| (i as f64).sqrt());
        let seq = map_indexed_seq(1000, |i| (i as f64).sqrt());
        assert_eq!(par, seq);
    }

    #[test]
    fn chunked_fold_is_chunk_structured() {
        // Histogram accumulation: identical for any worker count because the
        // chunk structure is fixed.
        let hist = fold_chunked(
            10_000,
            256,
            || vec![0.0f64; 4],
            |h, i| h[i % 4] += (i as f64).sin(),
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
        let mut expect = vec![0.0f64; 4];
        // Reference: same chunk structure, folded by hand.
        for c in 0..(10_000usize).div_ceil(256) {
            let mut part = vec![0.0f64; 4];
            for i in c * 256..((c + 1) * 256).min(10_000) {
                part[i % 4] += (i as f64).sin();
            }
            for (x, y) in expect.iter_mut().zip(part) {
                *x += y;
            }
        }
        assert_eq!(hist, expect);
    }

    #[test]
    fn empty_fold_returns_init() {
        let acc = fold_chunked(0, 16, || 42usize, |_, _| {}, |a, _| a);
        assert_eq!(acc, 42);
    }
}
