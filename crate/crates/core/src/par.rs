//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the closures run on the rayon pool; without
//! it they run in order on the calling thread. Results always come back in
//! input order, so outputs do not depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `f` applied to every element of `items`.
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
        items.iter().map(f).collect()
    }
}

/// `f` applied to each element of `items` paired with the matching `data`.
pub fn zip_map_mut<T, D, R, F>(items: &mut [T], data: &[D], f: F) -> Vec<R>
where
    T: Send,
    D: Sync,
    R: Send,
    F: Fn(&mut T, &D) -> R + Sync + Send,
{
    assert_eq!(items.len(), data.len());
    #[cfg(feature = "parallel")]
    {
        items.par_iter_mut().zip(data.par_iter()).map(|(t, d)| f(t, d)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter_mut().zip(data).map(|(t, d)| f(t, d)).collect()
    }
}

/// Worker threads available to [`map`] (1 without the `parallel` feature).
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

/// Run `f` with at most `workers` threads. Sequential builds ignore the limit.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}
