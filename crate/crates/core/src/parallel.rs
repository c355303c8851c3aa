//! Order-preserving fan-out over independent work items.
//!
//! Work is always split into the same pieces regardless of the worker count,
//! and partial results are combined in item order, so sequential and threaded
//! execution produce bit-identical numbers.

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct Executor {
    workers: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    pub fn sequential() -> Self {
        Self {
            workers: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// `workers = 1` runs inline; more workers need the `parallel` feature.
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::Config("workers must be ≥ 1".into()));
        }
        if workers == 1 {
            return Ok(Self::sequential());
        }
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
            Ok(Self {
                workers,
                pool: Some(pool),
            })
        }
        #[cfg(not(feature = "parallel"))]
        {
            log::warn!("built without the `parallel` feature; running {workers} workers sequentially");
            Ok(Self::sequential())
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// `items.iter().map(f).collect()`, possibly in parallel.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| items.par_iter().map(&f).collect());
        }
        items.iter().map(f).collect()
    }

    /// Applies `f(i, &mut items[i], &work[i])` to paired slices.
    pub fn zip_mut<T, W, F>(&self, items: &mut [T], work: &[W], f: F)
    where
        T: Send,
        W: Sync,
        F: Fn(&mut T, &W) + Sync + Send,
    {
        debug_assert_eq!(items.len(), work.len());
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            pool.install(|| {
                items
                    .par_iter_mut()
                    .zip(work.par_iter())
                    .for_each(|(t, w)| f(t, w))
            });
            return;
        }
        for (t, w) in items.iter_mut().zip(work) {
            f(t, w);
        }
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::sequential()
    }
}
