//! Order-preserving data-parallel map.
//!
//! With the `parallel` feature the work runs on a rayon pool; without it, or
//! with `workers = Some(1)`, it runs sequentially. Results always come back in
//! input order, so outputs do not depend on the worker count.

use crate::error::{Error, Result};

/// Worker count to use when none is requested.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Whether this build can run work in parallel.
pub fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}

/// Sequential reference implementation of [`map`].
pub fn map_serial<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Maps `f` over `items` with up to `workers` threads (`None`: the global pool).
#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], workers: Option<usize>, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    match workers {
        Some(0) => Err(Error::InvalidArgument("workers must be at least 1".into())),
        Some(1) => Ok(map_serial(items, f)),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(|| items.par_iter().map(&f).collect()))
        }
        None => Ok(items.par_iter().map(f).collect()),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], workers: Option<usize>, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if workers == Some(0) {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    Ok(map_serial(items, f))
}

/// [`map`] for fallible work; the first error in input order wins.
pub fn try_map<T, R, F>(items: &[T], workers: Option<usize>, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    map(items, workers, f)?.into_iter().collect()
}
