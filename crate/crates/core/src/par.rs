//! Order-preserving data-parallel map.
//!
//! With the `parallel` feature the work is spread over the rayon pool; without
//! it the same closure runs sequentially. Output order always matches input
//! order, so results do not depend on the feature or the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for a [`map`] call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    #[default]
    Auto,
    Sequential,
}

pub fn map<T, R, F>(items: &[T], exec: Exec, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Auto => items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
    }
}

/// Whether [`Exec::Auto`] actually runs in parallel.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
