//! Synthetic size corpora, the static / adaptive / bucketed batching
//! comparison, and store iteration timing.

mod corpus;
mod harness;
mod iterate;
mod strategy;

pub use corpus::{histogram, CorpusConfig, SizeDistribution, SyntheticCorpus, CORPUS_CONFIG_VERSION};
pub use harness::{
    profile_corpus, run_benchmark, write_report, BenchConfig, BenchOutcome, BenchSummary, CorpusSummary,
    StrategySummary,
};
pub use iterate::{bench_iterate, row_checksum, EpochTiming, IterateReport};
pub use strategy::{
    mass_at_or_above, padded_batch_cost, run_adaptive, run_bucketed, run_static, share_ratio, tv_distance,
    StrategyReport,
};
