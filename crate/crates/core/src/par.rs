//! Chunked reductions over component indices.
//!
//! Work over `0..n` is split into fixed-size chunks. Each chunk is reduced
//! sequentially and chunk partials are combined in chunk order, so the
//! result depends only on `CHUNK`, never on the thread count or on whether
//! the `parallel` feature is enabled.

/// Components per chunk.
pub const CHUNK: usize = 256;

/// Defaults to `Parallel` when the `parallel` feature is on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExecMode {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

/// Sums `dim`-vectors produced by `fill(range, acc)` over all chunks of `0..n`.
///
/// `fill` must add the contribution of every index in `range` into `acc`.
pub fn chunked_vec_sum<F>(n: usize, dim: usize, mode: ExecMode, fill: F) -> Vec<f64>
where
    F: Fn(std::ops::Range<usize>, &mut [f64]) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let one = |c: usize| {
        let mut acc = vec![0.0; dim];
        fill(c * CHUNK..((c + 1) * CHUNK).min(n), &mut acc);
        acc
    };
    let partials: Vec<Vec<f64>> = match mode {
        ExecMode::Sequential => (0..chunks).map(one).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..chunks).into_par_iter().map(one).collect()
        }
    };
    let mut total = vec![0.0; dim];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Scalar version of [`chunked_vec_sum`].
pub fn chunked_sum<F>(n: usize, mode: ExecMode, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let one = |c: usize| (c * CHUNK..((c + 1) * CHUNK).min(n)).fold(0.0, |a, i| a + term(i));
    let partials: Vec<f64> = match mode {
        ExecMode::Sequential => (0..chunks).map(one).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..chunks).into_par_iter().map(one).collect()
        }
    };
    partials.into_iter().fold(0.0, |a, b| a + b)
}

/// Order-preserving map, parallel when the feature is on. Used for
/// independent runs (seeds, grid points).
pub fn map_ordered<T, R, F>(items: Vec<T>, mode: ExecMode, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    match mode {
        ExecMode::Sequential => items.into_iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.into_par_iter().map(f).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_bitwise() {
        let n = 3 * CHUNK + 17;
        let f = |r: std::ops::Range<usize>, acc: &mut [f64]| {
            for i in r {
                acc[0] += (i as f64).sin();
                acc[1] += 1.0 / (1.0 + i as f64);
            }
        };
        let a = chunked_vec_sum(n, 2, ExecMode::Sequential, f);
        let b = chunked_vec_sum(n, 2, ExecMode::default(), f);
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
        let s1 = chunked_sum(n, ExecMode::Sequential, |i| (i as f64).cos());
        let s2 = chunked_sum(n, ExecMode::default(), |i| (i as f64).cos());
        assert_eq!(s1.to_bits(), s2.to_bits());
    }

    #[test]
    fn empty_range() {
        assert_eq!(
            chunked_vec_sum(0, 3, ExecMode::default(), |_, _| {}),
            vec![0.0; 3]
        );
    }
}
