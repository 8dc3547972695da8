//! Replica fan-out. Results come back ordered by replica index, and each
//! replica derives its own noise streams from its index, so aggregates are
//! identical under any schedule or thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map over replica indices, in parallel when the `parallel` feature is
/// enabled.
pub fn map_replicas<T, F>(replicas: u32, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u32) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..replicas).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..replicas).map(f).collect()
    }
}

/// Sequential fallback, always available (used by the benchmarks to compare
/// against the parallel path).
pub fn map_replicas_seq<T, F>(replicas: u32, f: F) -> Vec<T>
where
    F: Fn(u32) -> T,
{
    (0..replicas).map(f).collect()
}
