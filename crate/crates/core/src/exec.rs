//! Work distribution for the data-parallel inner loops.
//!
//! With the `parallel` feature (on by default) the indexed maps fan out over
//! the rayon pool; without it they run inline. Results are collected in index
//! order either way, so the output never depends on thread scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..len`, in parallel when the `parallel` feature is enabled.
pub fn map_indexed<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Sequential twin of [`map_indexed`]; the fallback path, always available
/// so the two can be benchmarked against each other.
pub fn map_indexed_seq<U, F>(len: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..len).map(f).collect()
}

/// True when this build dispatches work to rayon.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
