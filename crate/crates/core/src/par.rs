//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the [`Mode::Parallel`] variant runs on
//! rayon; without it every mode degrades to a plain iterator. Results always
//! come back in input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

impl Default for Mode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Mode::Parallel
        } else {
            Mode::Sequential
        }
    }
}

pub fn map<T, R, F>(mode: Mode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Runs `f` on a pool bounded to `workers` threads.
pub fn with_workers<R, F>(mode: Mode, workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if mode == Mode::Parallel {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
        {
            return pool.install(f);
        }
    }
    let _ = (mode, workers);
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let items: Vec<u32> = (0..500).collect();
        let seq = map(Mode::Sequential, &items, |x| x * 3);
        let par = map(Mode::Parallel, &items, |x| x * 3);
        assert_eq!(seq, par);
        assert_eq!(seq[499], 1497);
    }

    #[test]
    fn bounded_pool_runs_closure() {
        let out = with_workers(Mode::Parallel, 2, || {
            map(Mode::Parallel, &[1, 2, 3], |x| x + 1)
        });
        assert_eq!(out, vec![2, 3, 4]);
    }
}
