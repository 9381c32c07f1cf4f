//! Budget-aware batching: profile per-sample peak cost under a resource
//! meter, fit a cost predictor, and pack samples into batches whose predicted
//! total never exceeds a budget.

mod batcher;
mod meter;
mod model;
mod profile;

pub use batcher::{size_aware_batches, Batch, SizeAwareBatcher};
pub use meter::{CallbackMeter, OutOfBudget, ResourceMeter, TrackedMeter};
pub use model::{fit_cost_model, CostModel, CostPredictor, FitReport, DEFAULT_SAFETY_MARGIN};
pub use profile::{collect_peak_alloc, read_profile_csv, write_profile_csv, ProfileRecord};
