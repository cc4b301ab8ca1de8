//! Data-parallel map helpers with a sequential fallback.
//!
//! All hot loops in the crate (pairwise distances, bootstrap replicates,
//! sweep rows) are expressed as index-to-value maps collected in index
//! order, so the parallel and sequential builds produce identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

/// Maps `f` over `0..n`, collecting results in index order; the first error
/// (in index order for the sequential build, any for the parallel one)
/// aborts the map.
pub(crate) fn try_map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
