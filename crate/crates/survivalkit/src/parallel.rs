use rayon::prelude::*;
use survivalkit_core::exec::Executor;

use crate::error::{Error, Result};

/// Caps the worker count when set to a positive integer.
pub const THREADS_ENV: &str = "SURVIVALKIT_THREADS";

/// Runs work items on a rayon pool, returning results in index order.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    /// `None` uses one worker per available core.
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.unwrap_or(0))
            .build()
            .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn from_env() -> Result<Self> {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Some(n),
                _ => return Err(Error::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
            },
            Err(_) => None,
        };
        Self::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
