//! Data-parallel execution with a sequential fallback.
//!
//! Every parallel loop in the crate goes through [`map_indexed`], which returns
//! results in index order. Callers reduce the returned vector sequentially, so
//! the schedule never changes a floating-point result.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How index-parallel work is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Plain loop on the calling thread.
    Sequential,
    /// Rayon work-stealing pool. Degrades to [`Execution::Sequential`] when the
    /// crate is built without the `parallel` feature.
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run work in parallel.
    pub fn is_parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Evaluate `f(0..count)` and return the results in index order.
///
/// `chunks` is a hint for the number of parallel tasks; it affects only the
/// schedule.
pub fn map_indexed<T, F>(exec: Execution, count: usize, chunks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..count).map(f).collect(),
        Execution::Parallel => parallel_map(count, chunks, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(count: usize, chunks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let min_len = (count / chunks.max(1)).max(1);
    (0..count).into_par_iter().with_min_len(min_len).map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(count: usize, _chunks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}
