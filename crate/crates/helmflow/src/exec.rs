//! Thread-pool executor for sweeps and per-bus assessment.

use helmflow_core::stability::Executor;
use rayon::prelude::*;

/// Runs jobs on the global Rayon pool. Results keep input order.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonExecutor;

impl Executor for RayonExecutor {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_par_iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_order() {
        let out = RayonExecutor.map((0..1000).collect(), |x: u64| x * x);
        assert!(out.iter().enumerate().all(|(i, &y)| y == (i * i) as u64));
    }
}
