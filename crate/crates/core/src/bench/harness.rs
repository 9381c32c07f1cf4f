use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::corpus::SyntheticCorpus;
use super::strategy::{mass_at_or_above, run_adaptive, run_bucketed, run_static, share_ratio, tv_distance, StrategyReport};
use crate::bucket::{create_buckets, BucketSpec};
use crate::sizeaware::{collect_peak_alloc, fit_cost_model, write_profile_csv, CostModel, ProfileRecord, TrackedMeter};
use crate::{BoxError, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub budget: f64,
    pub max_width: u64,
    pub min_count: usize,
    pub epochs: u64,
    pub seed: u64,
    pub static_batch_size: usize,
    pub adaptive_group_width: u64,
    pub safety_margin: f64,
}

impl BenchConfig {
    /// Parameters of the reference comparison.
    pub fn reference() -> Self {
        Self {
            budget: 42_000.0,
            max_width: 2,
            min_count: 32,
            epochs: 10,
            seed: 0,
            static_batch_size: 8,
            adaptive_group_width: 16,
            safety_margin: crate::sizeaware::DEFAULT_SAFETY_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub emitted: u64,
    pub skipped: u64,
    pub batches: u64,
    pub tv_distance: f64,
    pub top_decile_mass: f64,
    pub modal_ratio: f64,
    pub median_padding: u64,
    pub total_padding: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n_samples: usize,
    pub seed: u64,
    pub node_width: u64,
    pub min_size: u64,
    pub max_size: u64,
    pub modal_size: u64,
    pub top_decile_threshold: u64,
    pub top_decile_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub corpus: CorpusSummary,
    pub config: BenchConfig,
    pub n_buckets: usize,
    pub strategies: Vec<StrategySummary>,
}

impl BenchSummary {
    pub fn strategy(&self, name: &str) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.strategy == name)
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub corpus_histogram: BTreeMap<u64, u64>,
    pub profile: Vec<ProfileRecord>,
    pub model: CostModel,
    pub buckets: BucketSpec,
    pub reports: Vec<StrategyReport>,
    pub summary: BenchSummary,
}

/// Peak units of collating one sample: the node tensor and the adjacency
/// matrix are alive together.
fn collate_workload(n: &u64, width: u64, meter: &mut TrackedMeter) -> std::result::Result<(), BoxError> {
    let nodes = n * width;
    let adj = n * n;
    meter.alloc(nodes)?;
    meter.alloc(adj)?;
    meter.free(adj);
    meter.free(nodes);
    Ok(())
}

/// Profiles the collation workload once per distinct corpus size and fits a
/// cost model on `[n, n^2]`.
pub fn profile_corpus(corpus: &SyntheticCorpus, safety_margin: f64) -> Result<(Vec<ProfileRecord>, CostModel)> {
    let distinct: Vec<u64> = corpus.histogram().into_keys().collect();
    let width = corpus.node_width;
    let mut meter = TrackedMeter::new();
    let records = collect_peak_alloc(
        distinct,
        &mut meter,
        |n: &u64, m: &mut TrackedMeter| collate_workload(n, width, m),
        |n: &u64| Ok(vec![*n as f64, (*n as f64) * (*n as f64)]),
    )?;
    let model = fit_cost_model(&records, safety_margin)?;
    Ok((records, model))
}

pub fn run_benchmark(corpus: &SyntheticCorpus, cfg: &BenchConfig) -> Result<BenchOutcome> {
    let (profile, model) = profile_corpus(corpus, cfg.safety_margin)?;
    let buckets = create_buckets(&corpus.sizes, cfg.max_width, cfg.min_count)?;
    let reports = vec![
        run_static(corpus, cfg.static_batch_size, &model, cfg.budget, cfg.epochs, cfg.seed)?,
        run_adaptive(corpus, cfg.adaptive_group_width, &model, cfg.budget, cfg.epochs, cfg.seed)?,
        run_bucketed(corpus, &buckets, &model, cfg.budget, cfg.epochs, cfg.seed)?,
    ];

    let corpus_histogram = corpus.histogram();
    let mode = corpus.modal_size();
    let top = corpus.top_decile_threshold();
    let strategies = reports
        .iter()
        .map(|r| StrategySummary {
            strategy: r.strategy.clone(),
            emitted: r.emitted,
            skipped: r.skipped,
            batches: r.batches,
            tv_distance: tv_distance(&r.size_histogram, &corpus_histogram),
            top_decile_mass: mass_at_or_above(&r.size_histogram, top),
            modal_ratio: share_ratio(&r.size_histogram, &corpus_histogram, mode),
            median_padding: r.padding.median_padding(),
            total_padding: r.padding.total_padding(),
        })
        .collect();
    let summary = BenchSummary {
        corpus: CorpusSummary {
            n_samples: corpus.len(),
            seed: corpus.seed,
            node_width: corpus.node_width,
            min_size: corpus.min_size,
            max_size: corpus.max_size,
            modal_size: mode,
            top_decile_threshold: top,
            top_decile_mass: mass_at_or_above(&corpus_histogram, top),
        },
        config: cfg.clone(),
        n_buckets: buckets.len(),
        strategies,
    };
    Ok(BenchOutcome { corpus_histogram, profile, model, buckets, reports, summary })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    write(path, &text)
}

fn sizes_csv(h: &BTreeMap<u64, u64>) -> String {
    let n: u64 = h.values().sum();
    let mut out = String::from("size,count,fraction\n");
    for (s, c) in h {
        let _ = writeln!(out, "{s},{c},{}", *c as f64 / n.max(1) as f64);
    }
    out
}

/// Writes the report directory. Everything except `timings.json` is a pure
/// function of the corpus and configuration, so reruns with the same seeds
/// are byte-identical:
///
/// * `summary.json`, `costmodel.json`, `buckets.json`, `profile.csv`
/// * `corpus_sizes.csv`, `<strategy>_sizes.csv`, `<strategy>_padding.csv`
/// * with `gnuplot`: `sizes.dat` (fraction per size, one column per
///   strategy) and `<strategy>_padding.dat`
pub fn write_report(out_dir: &Path, outcome: &BenchOutcome, gnuplot: bool) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    json(&out_dir.join("summary.json"), &outcome.summary)?;
    outcome.model.save(&out_dir.join("costmodel.json"))?;
    outcome.buckets.save_json(&out_dir.join("buckets.json"))?;
    write_profile_csv(&out_dir.join("profile.csv"), &outcome.profile)?;
    write(&out_dir.join("corpus_sizes.csv"), &sizes_csv(&outcome.corpus_histogram))?;

    let mut timings = BTreeMap::new();
    for r in &outcome.reports {
        write(&out_dir.join(format!("{}_sizes.csv", r.strategy)), &sizes_csv(&r.size_histogram))?;
        r.padding.write_csv(&out_dir.join(format!("{}_padding.csv", r.strategy)))?;
        timings.insert(r.strategy.clone(), r.elapsed_secs);
    }
    json(&out_dir.join("timings.json"), &timings)?;

    if gnuplot {
        let frac = |h: &BTreeMap<u64, u64>, s: u64| {
            let n: u64 = h.values().sum();
            *h.get(&s).unwrap_or(&0) as f64 / n.max(1) as f64
        };
        let mut dat = String::from("# size corpus");
        for r in &outcome.reports {
            let _ = write!(dat, " {}", r.strategy);
        }
        dat.push('\n');
        for &s in outcome.corpus_histogram.keys() {
            let _ = write!(dat, "{s} {}", frac(&outcome.corpus_histogram, s));
            for r in &outcome.reports {
                let _ = write!(dat, " {}", frac(&r.size_histogram, s));
            }
            dat.push('\n');
        }
        write(&out_dir.join("sizes.dat"), &dat)?;
        for r in &outcome.reports {
            let mut dat = String::from("# batch_id padding_elements\n");
            for row in &r.padding.rows {
                let _ = writeln!(dat, "{} {}", row.batch_id, row.padding_elements);
            }
            write(&out_dir.join(format!("{}_padding.dat", r.strategy)), &dat)?;
        }
    }
    Ok(())
}
