//! Execution strategy for the data-parallel loops.
//!
//! With the `parallel` feature, [`Exec::Parallel`] dispatches through rayon;
//! otherwise (or with [`Exec::Sequential`]) the same closures run in index
//! order. Closures receive their block index, never a thread id, so the two
//! paths produce identical output.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// The strategy actually used: `Parallel` degrades to `Sequential` when
    /// the crate is built without rayon.
    pub fn effective(self) -> Exec {
        if cfg!(feature = "parallel") {
            self
        } else {
            Exec::Sequential
        }
    }
}

/// Calls `f(block_index, block)` for every `block_len`-sized chunk of `out`.
pub fn for_each_block<T, F>(exec: Exec, out: &mut [T], block_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(block_len > 0);
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            out.par_chunks_mut(block_len).enumerate().for_each(|(b, chunk)| f(b, chunk));
        }
        _ => out.chunks_mut(block_len).enumerate().for_each(|(b, chunk)| f(b, chunk)),
    }
}

/// Maps `f` over `0..n`, returning results in index order.
pub fn map_indexed<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Runs `f` on a pool with `workers` threads (or the global pool when
/// `workers` is `None`). A no-op wrapper without the `parallel` feature.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = workers {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = workers;
    f()
}
