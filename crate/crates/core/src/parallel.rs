//! Data-parallel map over independent instances. With the `parallel` feature
//! the work runs on the rayon pool; without it everything is sequential.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items` in order, on the thread pool when available.
#[cfg(feature = "parallel")]
pub fn map_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    sequential_collect(items, f)
}

/// Always single threaded; the reference for benchmarks and determinism checks.
pub fn sequential_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Whether `map_collect` runs on the rayon pool in this build.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
