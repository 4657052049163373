//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) batch work is spread over the rayon
//! pool; without it every helper runs a plain loop. Callers that need to pick
//! at runtime (the benches, mostly) pass an [`Exec`] explicitly. All helpers
//! return results in index order, so output never depends on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for batch operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

/// Scans shorter than this (in scalar work units) always run sequentially.
pub(crate) const SCAN_THRESHOLD: usize = 1 << 15;

/// Evaluates `f(i)` for `i in 0..n`, collecting in index order.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Exec::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
    }
}

/// Index maximizing `key`, ties going to `better_tie` then the smallest index.
///
/// The comparison is a total order on (key, tie, -index), so the parallel
/// reduction returns exactly what the sequential scan would.
pub(crate) fn argmax_by<F>(exec: Exec, n: usize, key: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> (f64, f64) + Sync + Send,
{
    let pick = |a: (usize, (f64, f64)), b: (usize, (f64, f64))| {
        let (ia, (ka, ta)) = a;
        let (ib, (kb, tb)) = b;
        if kb > ka || (kb == ka && (tb > ta || (tb == ta && ib < ia))) {
            b
        } else {
            a
        }
    };
    let best = match exec {
        Exec::Sequential => (0..n).map(|i| (i, key(i))).reduce(pick),
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..n)
            .into_par_iter()
            .map(|i| (i, key(i)))
            .reduce_with(pick),
    };
    best.map(|(i, (k, _))| (i, k))
}

/// Smallest index satisfying `pred`.
pub(crate) fn first_index<F>(exec: Exec, n: usize, pred: F) -> Option<usize>
where
    F: Fn(usize) -> bool + Sync + Send,
{
    match exec {
        Exec::Sequential => (0..n).find(|&i| pred(i)),
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..n).into_par_iter().find_first(|&i| pred(i)),
    }
}

/// Picks [`Exec::default`] only when the scan is large enough to pay for it.
pub(crate) fn for_scan(work: usize) -> Exec {
    if work >= SCAN_THRESHOLD {
        Exec::default()
    } else {
        Exec::Sequential
    }
}

/// Derives an independent stream seed from a master seed and an index
/// (SplitMix64 finalizer over the pair).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
