//! Data-parallel helpers with a sequential fallback.
//!
//! Work is split into fixed-size chunks whose boundaries depend only on the
//! input length. Results come back in chunk order and callers reduce them in
//! that order, so parallel and sequential execution give bit-identical
//! floating-point results for any thread count.
//!
//! Without the `parallel` feature, [`Execution::Parallel`] runs sequentially.

use serde::{Deserialize, Serialize};

/// Chunk length for batched gradient and evaluation work.
pub const CHUNK_LEN: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Applies `f(chunk_index, chunk)` to each `chunk_len` slice of `items`,
/// returning results in chunk order.
pub fn map_chunks<T, R, F>(exec: Execution, items: &[T], chunk_len: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &[T]) -> R + Sync + Send,
{
    assert!(chunk_len > 0);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_chunks(chunk_len).enumerate().map(|(i, c)| f(i, c)).collect();
    }
    let _ = exec.is_parallel();
    items.chunks(chunk_len).enumerate().map(|(i, c)| f(i, c)).collect()
}

/// `(0..n).map(f)` in index order, possibly computed in parallel.
pub fn map_indexed<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec.is_parallel();
    (0..n).map(f).collect()
}
