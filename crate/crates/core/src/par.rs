//! Deterministic data-parallel helpers with a sequential fallback.
//!
//! Every helper produces its output in index order, so results are identical
//! in both modes. Reductions are always done sequentially by the callers.

use serde::{Deserialize, Serialize};

/// How index-parallel loops are executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing; only available with the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// The mode actually used: `Parallel` degrades to `Sequential` when the
    /// crate was built without rayon.
    pub fn effective(self) -> Execution {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }
}

/// Loops shorter than this run sequentially even in parallel mode.
#[cfg(feature = "parallel")]
const MIN_PAR_LEN: usize = 256;

/// `(0..len).map(f).collect()`, possibly in parallel.
pub fn map_indices<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.effective() == Execution::Parallel && len >= MIN_PAR_LEN {
        use rayon::prelude::*;
        return (0..len).into_par_iter().with_min_len(64).map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Fills `out[i] = f(i)` in chunks of `chunk` elements; `f` receives the chunk
/// start index and the chunk slice.
pub fn fill_chunks<T, F>(exec: Execution, out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if exec.effective() == Execution::Parallel && out.len() >= MIN_PAR_LEN {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k * chunk, c));
        return;
    }
    let _ = exec;
    out.chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k * chunk, c));
}

/// Maps independent jobs (runs, ensemble members) regardless of size, in a
/// pool with at most `jobs` threads when `jobs` is given.
pub fn map_jobs<I, T, F>(exec: Execution, jobs: Option<usize>, items: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.effective() == Execution::Parallel {
        use rayon::prelude::*;
        let run = || items.into_par_iter().map(&f).collect::<Vec<T>>();
        return match jobs {
            Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build() {
                Ok(pool) => pool.install(run),
                Err(_) => run(),
            },
            None => run(),
        };
    }
    let _ = (exec, jobs);
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| (i as f64).sin() * 3.0;
        let a = map_indices(Execution::Sequential, 5000, f);
        let b = map_indices(Execution::Parallel, 5000, f);
        assert_eq!(a, b);

        let mut x = vec![0.0; 3001];
        let mut y = vec![0.0; 3001];
        let g = |start: usize, c: &mut [f64]| {
            for (k, v) in c.iter_mut().enumerate() {
                *v = ((start + k) as f64).sqrt();
            }
        };
        fill_chunks(Execution::Sequential, &mut x, 100, g);
        fill_chunks(Execution::Parallel, &mut y, 100, g);
        assert_eq!(x, y);

        let jobs: Vec<u64> = (0..17).collect();
        let s = map_jobs(Execution::Sequential, None, jobs.clone(), |j| j * j);
        let p = map_jobs(Execution::Parallel, Some(2), jobs, |j| j * j);
        assert_eq!(s, p);
    }
}
