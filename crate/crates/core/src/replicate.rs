//! Deterministic parallel replications.
//!
//! Replication `i` always draws from `RngStream::new(seed, i)` and results come
//! back in ascending index order, so any reduction over them is independent of
//! the worker count.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Seed, replication count and worker count of one Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReplicationPlan {
    pub seed: u64,
    pub reps: u64,
    pub workers: usize,
}

impl ReplicationPlan {
    pub fn new(seed: u64, reps: u64, workers: usize) -> Result<Self> {
        if reps == 0 {
            return Err(Error::invalid("reps must be at least 1"));
        }
        if workers == 0 {
            return Err(Error::invalid("workers must be at least 1"));
        }
        Ok(Self { seed, reps, workers })
    }

    /// Same plan with another replication count.
    pub fn with_reps(self, reps: u64) -> Self {
        Self { reps, ..self }
    }

    /// Same plan on an independent family of streams.
    pub fn derived(self, salt: u64) -> Self {
        Self { seed: crate::rng::derive_seed(self.seed, salt), ..self }
    }
}

/// Runs `task(rng, index)` for every replication and returns the results in
/// index order.
pub fn replicate<T, F>(plan: &ReplicationPlan, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RngStream, u64) -> T + Sync,
{
    let run = |i: u64| {
        let mut rng = RngStream::new(plan.seed, i);
        task(&mut rng, i)
    };
    if plan.workers <= 1 {
        return Ok((0..plan.reps).map(run).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..plan.reps).into_par_iter().map(run).collect()))
}

/// Folds replication results in index order without materializing them all.
/// Results are produced in chunks so memory stays bounded for large `reps`.
pub fn replicate_fold<T, A, F, G>(plan: &ReplicationPlan, init: A, task: F, mut fold: G) -> Result<A>
where
    T: Send,
    F: Fn(&mut RngStream, u64) -> T + Sync,
    G: FnMut(A, T) -> A,
{
    const CHUNK: u64 = 1 << 14;
    let pool = if plan.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(plan.workers)
                .build()
                .map_err(|e| Error::Resource(format!("cannot start worker pool: {e}")))?,
        )
    } else {
        None
    };
    let run = |i: u64| {
        let mut rng = RngStream::new(plan.seed, i);
        task(&mut rng, i)
    };
    let mut acc = init;
    let mut start = 0;
    while start < plan.reps {
        let end = (start + CHUNK).min(plan.reps);
        let chunk: Vec<T> = match &pool {
            Some(p) => p.install(|| (start..end).into_par_iter().map(run).collect()),
            None => (start..end).map(run).collect(),
        };
        for item in chunk {
            acc = fold(acc, item);
        }
        start = end;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_values_ignore_worker_count() {
        let one = ReplicationPlan::new(5, 1000, 1).unwrap();
        let many = ReplicationPlan::new(5, 1000, 4).unwrap();
        let f = |rng: &mut RngStream, i: u64| (i, rng.next_u64());
        assert_eq!(replicate(&one, f).unwrap(), replicate(&many, f).unwrap());
    }

    #[test]
    fn fold_matches_materialized_sum() {
        let plan = ReplicationPlan::new(11, 40_000, 3).unwrap();
        let f = |rng: &mut RngStream, _: u64| rng.uniform();
        let direct: f64 = replicate(&plan, f).unwrap().iter().sum();
        let folded = replicate_fold(&plan, 0.0, f, |a, x| a + x).unwrap();
        assert_eq!(direct, folded);
    }

    #[test]
    fn zero_reps_rejected() {
        assert!(ReplicationPlan::new(1, 0, 1).is_err());
        assert!(ReplicationPlan::new(1, 1, 0).is_err());
    }
}
