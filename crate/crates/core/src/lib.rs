//! Data loading for training on variably-sized samples.
//!
//! * [`store`]: memory-mapped CSR matrices with per-row metadata, built from
//!   Matrix Market coordinate files.
//! * [`tokenizer`]: rank-order token sequences from expression rows.
//! * [`sizeaware`]: peak-cost profiling, cost-model fitting and budgeted
//!   batching.
//! * [`bucket`]: size buckets, bucketed batch sampling and padding accounting.
//! * [`shard`]: tar shard writing, streaming with a shuffle buffer, and lazy
//!   stage pipelines.
//! * [`bench`]: synthetic corpora and batching strategy comparisons.

#[cfg(target_endian = "big")]
compile_error!("densefeed stores are little-endian and are mapped in place; big-endian hosts are not supported");

pub mod bench;
pub mod bucket;
pub mod error;
pub mod shard;
pub mod sizeaware;
pub mod store;
pub mod tokenizer;

pub use error::{BoxError, Error, Result};
