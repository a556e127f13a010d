//! Per-path work distribution.
//!
//! Results always come back in path-index order, so every reduction
//! downstream is a sequential fold and outputs are independent of the worker
//! count. Without the `parallel` feature everything runs on the caller's
//! thread.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Executor {
    Sequential,
    /// Rayon pool with the given number of threads.
    #[cfg(feature = "parallel")]
    Threads(usize),
}

impl Default for Executor {
    fn default() -> Self {
        Self::with_workers(0)
    }
}

impl Executor {
    /// `workers = 0` means one worker per available core.
    pub fn with_workers(workers: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let n = if workers == 0 {
                std::thread::available_parallelism().map_or(1, |n| n.get())
            } else {
                workers
            };
            Executor::Threads(n)
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            Executor::Sequential
        }
    }

    pub fn workers(&self) -> usize {
        match self {
            Executor::Sequential => 1,
            #[cfg(feature = "parallel")]
            Executor::Threads(n) => *n,
        }
    }

    /// `(0..count).map(f)` collected in index order.
    pub fn map_indexed<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Executor::Sequential => (0..count).map(f).collect(),
            #[cfg(feature = "parallel")]
            Executor::Threads(n) => {
                use rayon::prelude::*;
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(*n)
                    .build()
                    .expect("failed to build rayon pool");
                pool.install(|| (0..count).into_par_iter().map(f).collect())
            }
        }
    }
}
