//! Size buckets and bucket-pure batch sampling to keep padding small.

mod padding;
mod sampler;
mod spec;

pub use padding::{padding_elements, padding_for_indices, PaddingReport, PaddingRow, TensorShapes};
pub use sampler::{bucket_batches, BucketBatchSampler, BucketBatches};
pub use spec::{create_buckets, Bucket, BucketSpec, BucketSummary};
