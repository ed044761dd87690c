//! Thin switch between rayon and sequential execution.
//!
//! Grid scans and Monte-Carlo loops call [`map_ordered`]; with the
//! `parallel` feature (default) the closure fans out on the rayon pool,
//! without it the sequential path below runs. Either way results come back
//! in input order, so downstream output is identical. The sequential
//! implementation stays compiled under both configurations — the benches
//! compare the two directly.

/// Map `f` over `items`, preserving order. Sequential reference path.
pub fn map_ordered_seq<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Map `f` over `items` on the worker pool, preserving input order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Map `f` over `items`, preserving input order (sequential build).
#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    map_ordered_seq(items, f)
}

/// Cap the worker pool at `n` threads. Must run before the first parallel
/// call; later calls are ignored (the pool is already built). No-op in
/// sequential builds.
pub fn configure_threads(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
    }
}
