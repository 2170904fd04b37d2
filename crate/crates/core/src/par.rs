//! Execution-mode switch for the data-parallel loops.
//!
//! With the `parallel` feature the loops below run on the rayon pool; without
//! it they fall back to plain iterators. Every helper preserves input order so
//! results are bit-identical in both modes.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// How data-parallel loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Exec {
    /// The process-wide default: parallel when compiled in and not disabled.
    pub fn current() -> Exec {
        if cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed) {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Disable (or re-enable) the parallel path process-wide.
pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

/// Order-preserving map over a range of indices.
pub fn map_range<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Order-preserving map over a slice.
pub fn map_slice<S, T, F>(exec: Exec, items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Fill `out[i] = f(i)` in chunks.
pub fn fill<T, F>(exec: Exec, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            const CHUNK: usize = 4096;
            out.par_chunks_mut(CHUNK)
                .enumerate()
                .for_each(|(c, chunk)| {
                    for (k, slot) in chunk.iter_mut().enumerate() {
                        *slot = f(c * CHUNK + k);
                    }
                });
        }
        _ => {
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = f(i);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let a = map_range(Exec::Sequential, 1000, |i| (i as f64).sqrt());
        let b = map_range(Exec::Parallel, 1000, |i| (i as f64).sqrt());
        assert_eq!(a, b);
        let mut x = vec![0u64; 10_000];
        let mut y = vec![0u64; 10_000];
        fill(Exec::Sequential, &mut x, |i| (i * i) as u64);
        fill(Exec::Parallel, &mut y, |i| (i * i) as u64);
        assert_eq!(x, y);
    }
}
