//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) these dispatch to rayon;
//! without it they run as plain sequential iterators. Results are always
//! returned in index order so reductions stay deterministic regardless of
//! how many threads participated.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f` on every index in `0..len` and collects the results in order.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

/// Splits `0..total` into fixed-size chunks and maps each chunk range.
///
/// Chunk boundaries depend only on `total` and `chunk`, never on the thread
/// count.
pub fn map_chunks<T, F>(total: u64, chunk: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let count = total.div_ceil(chunk) as usize;
    map_indexed(count, |c| {
        let start = c as u64 * chunk;
        let end = (start + chunk).min(total);
        f(start, end)
    })
}

/// Reports whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
