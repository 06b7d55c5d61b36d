//! Thread-pool executor for the core's job maps.

use cqed_core::exec::Executor;
use rayon::prelude::*;

/// Runs jobs on a dedicated rayon pool; results keep input order.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `workers = 0` uses every available core.
    pub fn new(workers: usize) -> anyhow::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
        Ok(Parallel { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Parallel {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}

/// Default worker count: the number of available cores.
pub fn available_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
