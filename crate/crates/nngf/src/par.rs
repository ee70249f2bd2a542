//! Data-parallel map helpers.
//!
//! With the `parallel` feature (default) the maps run on rayon; without it
//! they fall back to plain sequential iteration. Results are collected in
//! input order, so output is identical for any worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_slice<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, U, F: Fn(&T) -> U>(items: &[T], f: F) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Map `f` over an index range, preserving order.
#[cfg(feature = "parallel")]
pub fn map_range<U: Send, F: Fn(usize) -> U + Sync + Send>(n: usize, f: F) -> Vec<U> {
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F: Fn(usize) -> U>(n: usize, f: F) -> Vec<U> {
    (0..n).map(f).collect()
}

/// Sequential map with the same signature as [`map_range`]; kept available
/// in all configurations so benches can compare both paths directly.
pub fn map_range_seq<U, F: Fn(usize) -> U>(n: usize, f: F) -> Vec<U> {
    (0..n).map(f).collect()
}

/// Run `body` on a dedicated pool with `workers` threads (0 = default size).
/// Without the `parallel` feature the body just runs on the current thread.
#[cfg(feature = "parallel")]
pub fn with_workers<U: Send, F: FnOnce() -> U + Send>(workers: usize, body: F) -> U {
    if workers == 0 {
        return body();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    pool.install(body)
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<U, F: FnOnce() -> U>(_workers: usize, body: F) -> U {
    body()
}
