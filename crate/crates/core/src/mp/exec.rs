use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};

/// Runs independent per-subdomain tasks, serially or on a private thread
/// pool. Results always come back in index order.
pub struct Executor {
    pool: Option<ThreadPool>,
}

impl Executor {
    pub fn new(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Err(Error::InvalidConfig("thread count must be positive".into()));
        }
        let pool = if threads == 1 {
            None
        } else {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?,
            )
        };
        Ok(Self { pool })
    }

    pub fn serial() -> Self {
        Self { pool: None }
    }

    pub fn map<T, F>(&self, items: &[usize], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        match &self.pool {
            None => items.iter().map(|&j| f(j)).collect(),
            Some(pool) => pool.install(|| items.par_iter().map(|&j| f(j)).collect()),
        }
    }
}
