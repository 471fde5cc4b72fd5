//! Data-parallel helpers that fall back to plain iteration when the
//! `parallel` feature is disabled.
//!
//! Every helper has a `_seq` twin that is always sequential, so callers
//! (and the benches) can compare both paths in one build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether the crate was built with rayon support.
pub const PARALLEL: bool = cfg!(feature = "parallel");

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seq(items, f)
    }
}

pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Folds each item into an accumulator created by `identity`, then merges
/// the partial accumulators.
///
/// `merge` must be associative and `identity()` must be its neutral
/// element; the result is then independent of how items were split.
///
/// Items are cut into one contiguous chunk per pool thread, so large
/// accumulators are built and merged only that many times.
pub fn fold_reduce<T, A, I, F, M>(items: &[T], identity: I, fold: F, merge: M) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &T) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        let chunk = items.len().div_ceil(rayon::current_num_threads()).max(1);
        items
            .par_chunks(chunk)
            .map(|c| c.iter().fold(identity(), &fold))
            .reduce_with(&merge)
            .unwrap_or_else(identity)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = &merge;
        fold_reduce_seq(items, identity, fold)
    }
}

pub fn fold_reduce_seq<T, A, I, F>(items: &[T], identity: I, fold: F) -> A
where
    I: Fn() -> A,
    F: Fn(A, &T) -> A,
{
    items.iter().fold(identity(), fold)
}
