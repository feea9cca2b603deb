//! Data-parallel map used by the scoring kernels.
//!
//! With the `parallel` feature (default) work is spread across the rayon
//! pool when the caller asks for it. Without the feature, or when
//! `parallel == false`, the same closure runs sequentially. Results are
//! always collected in index order, so the two paths are bit-identical.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(i)` for `i in 0..n` and returns the results in order.
pub fn map_range<T, F>(parallel: bool, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Whether this build can actually run work in parallel.
pub const fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}
