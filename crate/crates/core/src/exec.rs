//! Pluggable execution for embarrassingly parallel loops.
//!
//! Tree growing and bootstrap replicates are independent work items. The
//! core runs them through an [`Executor`], which must return results in index
//! order so that every reduction downstream is reproducible regardless of
//! scheduling.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluates `f(0..n)` and returns the results in index order.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every item on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
