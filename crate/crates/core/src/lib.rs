//! SPMD distributed-array runtime.
//!
//! * [`transport`]: worker launch, point-to-point messages and collectives.
//! * [`dist_map`]: 1-D block distributions and their index arithmetic.
//! * [`darray`]: block-distributed dense matrices (`local`, `put_local`,
//!   `agg`, `transpose_grid`).
//! * [`kernels`]: task-parallel batch processing, distributed image
//!   formation, and the coupled-oscillator flux sweep, each with a serial
//!   reference.
//! * [`bench`]: timing, speedup tables, Amdahl bounds, CSV and SVG output.

pub mod bench;
pub mod darray;
pub mod dist_map;
pub mod kernels;
pub mod transport;

pub use darray::{dzeros, DArray, DArrayError, Element};
pub use dist_map::{block_partition, BlockRange, Dim, DistMap, MapError};
pub use transport::{
    launch, Backend, LaunchError, LaunchOptions, Payload, ReduceOp, TransportError, WorkerCtx,
};
