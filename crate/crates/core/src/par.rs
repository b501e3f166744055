// Compile-time selection between rayon and plain iterators. Without the
// `parallel` feature every helper runs sequentially and the `parallel`
// argument is ignored.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether this build can run anything in parallel at all.
pub const AVAILABLE: bool = cfg!(feature = "parallel");

/// Calls `f(chunk_index, chunk)` on consecutive chunks of `items`.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_chunk_mut<T, F>(items: &mut [T], chunk: usize, parallel: bool, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if parallel {
        items
            .par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    } else {
        items.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_chunk_mut<T, F>(items: &mut [T], chunk: usize, _parallel: bool, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    items.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Maps `f` over `items`, keeping input order in the output.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, R, F>(items: Vec<T>, parallel: bool, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    if parallel {
        items.into_par_iter().map(f).collect()
    } else {
        items.into_iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, R, F>(items: Vec<T>, _parallel: bool, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    items.into_iter().map(f).collect()
}
