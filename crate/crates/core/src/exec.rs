//! Sequential or rayon-backed execution of independent work items.
//!
//! Every parallel loop in the crate maps an index or a slice to results that
//! are collected back in input order, so reports are identical under either
//! strategy. Without the `parallel` feature, [`Execution::Parallel`] runs
//! sequentially.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
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
    /// Applies `f` to every index in `0..n`, returning results in index order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Applies `f` to every element of `items`, returning results in order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Like [`map_range`](Self::map_range) but stops at the first error in index order.
    pub fn try_map_range<R, E, F>(self, n: usize, f: F) -> Result<Vec<R>, E>
    where
        R: Send,
        E: Send,
        F: Fn(usize) -> Result<R, E> + Sync + Send,
    {
        self.map_range(n, f).into_iter().collect()
    }
}

/// Environment variable capping the rayon worker count (`0` or unset = automatic).
pub const THREADS_ENV: &str = "ATOMS_LAB_THREADS";

/// Configures the global rayon pool from [`THREADS_ENV`]. Returns the cap that
/// was applied, if any. Calling it after the pool is initialised is a no-op.
pub fn init_threads_from_env() -> Option<usize> {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)?;
    #[cfg(feature = "parallel")]
    {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(cap)
            .build_global()
            .is_err()
        {
            log::debug!("rayon pool already initialised; {THREADS_ENV} ignored");
        }
    }
    Some(cap)
}
