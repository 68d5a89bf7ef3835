//! Execution strategy for embarrassingly parallel work.
//!
//! Multi-chain sampling and per-angle posterior summaries parallelize over
//! independent indices with disjoint outputs, so the parallel mode produces
//! bit-identical results to the serial one; the `parallel` feature merely
//! changes how the work is scheduled.

/// How to execute an indexed map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Serial,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Execution {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        Execution::Parallel
    }

    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        Execution::Serial
    }
}

/// Apply `f` to every index in `0..n`, in order of index.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Serial => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
    }
}
