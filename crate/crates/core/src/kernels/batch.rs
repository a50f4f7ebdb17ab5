//! Task-parallel batch processing: every item is independent, so each rank
//! takes a contiguous block of item indices and the results are gathered in
//! global index order.

use crate::dist_map::block_partition;
use crate::transport::WorkerCtx;

use super::{mix64, my_block, unit_interval, KernelError, Partitioner};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BatchJob {
    /// Number of items (files) to process.
    pub n_items: usize,
    /// Mixing rounds per item; runtime is linear in this.
    pub work_cost: u64,
    pub seed: u64,
}

impl BatchJob {
    pub fn validate(&self) -> Result<(), KernelError> {
        if self.work_cost == 0 {
            return Err(KernelError::InvalidConfig("work_cost must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Synthetic per-item work: `work_cost` dependent rounds of a 64-bit mixer
/// seeded from `(seed, item_index)`, mapped to `[0, 1)`.
pub fn batch_work(item_index: usize, job: &BatchJob) -> Result<f64, KernelError> {
    if item_index >= job.n_items {
        return Err(KernelError::IndexOutOfRange {
            index: item_index,
            n: job.n_items,
        });
    }
    let mut state =
        mix64(job.seed) ^ mix64((item_index as u64).wrapping_add(1).wrapping_mul(GOLDEN));
    for _ in 0..job.work_cost {
        state = mix64(state.wrapping_add(GOLDEN));
    }
    Ok(unit_interval(state))
}

pub fn run_batch_serial(job: &BatchJob) -> Result<Vec<f64>, KernelError> {
    job.validate()?;
    (0..job.n_items).map(|i| batch_work(i, job)).collect()
}

/// Block-partitioned batch; the full result vector lands on rank 0.
pub fn run_batch_parallel(
    ctx: &mut WorkerCtx,
    job: &BatchJob,
) -> Result<Option<Vec<f64>>, KernelError> {
    run_batch_parallel_with(ctx, job, block_partition)
}

pub fn run_batch_parallel_with(
    ctx: &mut WorkerCtx,
    job: &BatchJob,
    partitioner: Partitioner,
) -> Result<Option<Vec<f64>>, KernelError> {
    job.validate()?;
    let mine = my_block(partitioner, job.n_items, ctx.world_size(), ctx.rank())?;
    let local: Vec<f64> = mine
        .as_range()
        .map(|i| batch_work(i, job))
        .collect::<Result<_, _>>()?;
    Ok(ctx.gather(0, &local)?.map(|g| g.data))
}
