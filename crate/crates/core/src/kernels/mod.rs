//! Reference kernels, each with a serial implementation and one or two SPMD
//! decompositions:
//!
//! * [`batch`]: independent work items split into contiguous index blocks
//!   (task parallel, no communication until the final gather).
//! * [`sar`]: shifted 2-D inverse DFT over a column-distributed matrix with
//!   an all-to-all redistribution between the two 1-D passes.
//! * [`sqif`]: flux sweep of a chain of coupled phase units, parallelized
//!   either over flux points (task parallel) or over units with per-stage
//!   halo exchange (data parallel).

pub mod batch;
pub mod dft;
pub mod sar;
pub mod sqif;

use crate::darray::DArrayError;
use crate::dist_map::{BlockRange, MapError};
use crate::transport::TransportError;

pub use batch::{
    batch_work, run_batch_parallel, run_batch_parallel_with, run_batch_serial, BatchJob,
};
pub use sar::{form_image_parallel, form_image_serial, sar_input, SarConfig};
pub use sqif::{
    series_sqif, sqif_rhs, sqif_sweep_dp, sqif_sweep_serial, sqif_sweep_tp, sqif_sweep_tp_with,
    HaloExchange, SqifParams, TransferCurve, UnitSum,
};

/// Splits `n` items over `p` ranks. [`crate::dist_map::block_partition`] is
/// the only correct one; the indirection lets tests inject faulty ones.
pub type Partitioner = fn(usize, usize) -> Result<Vec<BlockRange>, MapError>;

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    DArray(#[from] DArrayError),
    #[error("item index {index} out of range for {n} items")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite state at step {step} (unit {unit})")]
    NonFinite { step: usize, unit: usize },
    #[error("owned range {start}..{end} is a proper subset of {n} units but no halo exchange was supplied")]
    MissingHalo { start: usize, end: usize, n: usize },
    #[error("partition of {n} items over {p} ranks is malformed")]
    BadPartition { n: usize, p: usize },
}

/// Picks this rank's block out of a partition, rejecting partitions that do
/// not have one block per rank or that reach past `n`.
pub(crate) fn my_block(
    partitioner: Partitioner,
    n: usize,
    p: usize,
    rank: usize,
) -> Result<BlockRange, KernelError> {
    let parts = partitioner(n, p)?;
    if parts.len() != p || parts.iter().any(|r| r.end() > n) {
        return Err(KernelError::BadPartition { n, p });
    }
    Ok(parts[rank])
}

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Top 53 bits of `z` as a float in `[0, 1)`.
pub(crate) fn unit_interval(z: u64) -> f64 {
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
