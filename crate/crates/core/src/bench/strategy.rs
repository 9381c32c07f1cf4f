use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::corpus::SyntheticCorpus;
use crate::bucket::{padding_for_indices, BucketBatchSampler, BucketSpec, PaddingReport};
use crate::sizeaware::CostPredictor;
use crate::{Error, Result};

/// What one batching strategy emitted over all epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyReport {
    pub strategy: String,
    pub epochs: u64,
    pub size_histogram: BTreeMap<u64, u64>,
    pub padding: PaddingReport,
    pub emitted: u64,
    /// Samples not emitted: discarded with an over-budget batch (static) or
    /// too large for the budget on their own (adaptive, bucketed).
    pub skipped: u64,
    pub batches: u64,
    pub elapsed_secs: f64,
}

impl StrategyReport {
    fn new(strategy: &str, epochs: u64) -> Self {
        Self {
            strategy: strategy.to_owned(),
            epochs,
            size_histogram: BTreeMap::new(),
            padding: PaddingReport::default(),
            emitted: 0,
            skipped: 0,
            batches: 0,
            elapsed_secs: 0.0,
        }
    }

    fn record(&mut self, corpus: &SyntheticCorpus, indices: &[usize]) -> Result<()> {
        let pad = padding_for_indices(indices, |i| corpus.shapes(i))?;
        let max_size = indices.iter().map(|&i| corpus.sizes[i]).max().unwrap_or(0);
        self.padding.push(pad, indices.len(), max_size);
        for &i in indices {
            *self.size_histogram.entry(corpus.sizes[i]).or_insert(0) += 1;
        }
        self.emitted += indices.len() as u64;
        self.batches += 1;
        Ok(())
    }

    pub fn batch_sizes(&self) -> Vec<usize> {
        self.padding.rows.iter().map(|r| r.batch_cardinality).collect()
    }
}

fn check_budget(budget: f64) -> Result<()> {
    if budget > 0.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!("budget must be positive, got {budget}")))
    }
}

fn epoch_rng(seed: u64, epoch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    rng
}

/// Predicted cost of a batch padded to its largest member: the batch
/// cardinality times the cost of the elementwise feature maximum.
pub fn padded_batch_cost<P: CostPredictor + ?Sized>(features: &[Vec<f64>], indices: &[usize], model: &P) -> f64 {
    let Some(&first) = indices.first() else {
        return 0.0;
    };
    let mut max = features[first].clone();
    for &i in &indices[1..] {
        for (m, &x) in max.iter_mut().zip(&features[i]) {
            *m = m.max(x);
        }
    }
    indices.len() as f64 * model.predict(&max)
}

/// Fixed-size batches over a fresh shuffle each epoch; a batch whose padded
/// predicted cost exceeds the budget is discarded whole.
pub fn run_static<P: CostPredictor + ?Sized>(
    corpus: &SyntheticCorpus,
    batch_size: usize,
    model: &P,
    budget: f64,
    epochs: u64,
    seed: u64,
) -> Result<StrategyReport> {
    if batch_size == 0 {
        return Err(Error::Validation("batch_size must be at least 1".into()));
    }
    check_budget(budget)?;
    let start = Instant::now();
    let features = corpus.feature_matrix();
    let mut report = StrategyReport::new("static", epochs);
    for epoch in 0..epochs {
        let mut rng = epoch_rng(seed, epoch);
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            if padded_batch_cost(&features, chunk, model) <= budget {
                report.record(corpus, chunk)?;
            } else {
                report.skipped += chunk.len() as u64;
            }
        }
    }
    report.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Size-group baseline with adaptive cardinality. Samples are grouped into
/// size ranges of `group_width` starting at the corpus minimum; a group's
/// batch cardinality is `floor(budget / predict(group max))`, at least 1.
/// Groups whose largest member alone exceeds the budget are dropped. Each
/// batch comes from a group drawn with probability proportional to its
/// frequency, taking the next members of that group's reshuffled cycle,
/// until an epoch has emitted as many samples as the kept groups hold.
pub fn run_adaptive<P: CostPredictor + ?Sized>(
    corpus: &SyntheticCorpus,
    group_width: u64,
    model: &P,
    budget: f64,
    epochs: u64,
    seed: u64,
) -> Result<StrategyReport> {
    if group_width == 0 {
        return Err(Error::Validation("group width must be at least 1".into()));
    }
    check_budget(budget)?;
    let start = Instant::now();
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, &s) in corpus.sizes.iter().enumerate() {
        groups.entry((s - corpus.min_size) / group_width).or_default().push(i);
    }

    struct Group {
        members: Vec<usize>,
        cardinality: usize,
    }
    let mut kept: Vec<Group> = Vec::new();
    let mut dropped = 0u64;
    for members in groups.into_values() {
        let max = members.iter().map(|&i| corpus.sizes[i]).max().expect("non-empty group");
        let rep = members.iter().copied().find(|&i| corpus.sizes[i] == max).expect("max member");
        let cost = model.predict(&corpus.features(rep));
        if !(cost <= budget) {
            dropped += members.len() as u64;
            continue;
        }
        let cardinality = if cost > 0.0 { (budget / cost).floor().min(usize::MAX as f64) as usize } else { usize::MAX };
        kept.push(Group { members, cardinality: cardinality.max(1) });
    }
    let target: usize = kept.iter().map(|g| g.members.len()).sum();

    let mut report = StrategyReport::new("adaptive", epochs);
    for epoch in 0..epochs {
        report.skipped += dropped;
        let mut rng = epoch_rng(seed, epoch);
        let mut cycles: Vec<(Vec<usize>, usize)> = kept
            .iter()
            .map(|g| {
                let mut order = g.members.clone();
                order.shuffle(&mut rng);
                (order, 0)
            })
            .collect();
        let mut emitted = 0usize;
        while emitted < target {
            let mut pick = rng.random_range(0..target);
            let gi = kept
                .iter()
                .position(|g| {
                    if pick < g.members.len() {
                        true
                    } else {
                        pick -= g.members.len();
                        false
                    }
                })
                .expect("pick < target");
            let card = kept[gi].cardinality.min(target - emitted);
            let (order, cursor) = &mut cycles[gi];
            let mut batch = Vec::with_capacity(card);
            while batch.len() < card {
                if *cursor == order.len() {
                    order.shuffle(&mut rng);
                    *cursor = 0;
                }
                batch.push(order[*cursor]);
                *cursor += 1;
            }
            report.record(corpus, &batch)?;
            emitted += card;
        }
    }
    report.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Bucket-pure size-aware batches, one sampler epoch per epoch.
pub fn run_bucketed<P: CostPredictor + ?Sized>(
    corpus: &SyntheticCorpus,
    spec: &BucketSpec,
    model: &P,
    budget: f64,
    epochs: u64,
    seed: u64,
) -> Result<StrategyReport> {
    let start = Instant::now();
    let features = corpus.feature_matrix();
    let sampler = BucketBatchSampler::new(spec, &features, model, budget, seed)?;
    let mut report = StrategyReport::new("bucketed", epochs);
    for epoch in 0..epochs {
        let mut batches = sampler.epoch(epoch);
        for batch in batches.by_ref() {
            report.record(corpus, &batch.indices)?;
        }
        report.skipped += batches.skipped_count() as u64;
    }
    report.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Total-variation distance between two histograms, each normalized to a
/// probability distribution. An empty histogram counts as all-zero mass.
pub fn tv_distance(a: &BTreeMap<u64, u64>, b: &BTreeMap<u64, u64>) -> f64 {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let frac = |h: &BTreeMap<u64, u64>, n: u64, k: &u64| {
        if n == 0 {
            0.0
        } else {
            *h.get(k).unwrap_or(&0) as f64 / n as f64
        }
    };
    let keys: std::collections::BTreeSet<&u64> = a.keys().chain(b.keys()).collect();
    0.5 * keys.into_iter().map(|k| (frac(a, na, k) - frac(b, nb, k)).abs()).sum::<f64>()
}

/// Fraction of the histogram's mass at sizes `>= threshold`.
pub fn mass_at_or_above(h: &BTreeMap<u64, u64>, threshold: u64) -> f64 {
    let n: u64 = h.values().sum();
    if n == 0 {
        return 0.0;
    }
    h.range(threshold..).map(|(_, c)| c).sum::<u64>() as f64 / n as f64
}

/// Share of `size` in `emitted` relative to its share in `reference`.
pub fn share_ratio(emitted: &BTreeMap<u64, u64>, reference: &BTreeMap<u64, u64>, size: u64) -> f64 {
    let share = |h: &BTreeMap<u64, u64>| {
        let n: u64 = h.values().sum();
        if n == 0 {
            0.0
        } else {
            *h.get(&size).unwrap_or(&0) as f64 / n as f64
        }
    };
    let r = share(reference);
    if r == 0.0 {
        f64::NAN
    } else {
        share(emitted) / r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bucket::create_buckets;

    fn quad(x: &[f64]) -> f64 {
        x[1]
    }

    #[test]
    fn static_unbounded_keeps_everything() {
        let c = SyntheticCorpus::from_sizes((1..=50).collect(), 2).unwrap();
        let r = run_static(&c, 4, &quad, f64::INFINITY, 3, 1).unwrap();
        assert_eq!(r.skipped, 0);
        assert_eq!(r.emitted, 150);
        assert!(r.size_histogram.values().all(|&v| v == 3));
        assert_eq!(r.batches, 3 * 13);
    }

    #[test]
    fn static_loses_large_samples() {
        let mut sizes = vec![1u64; 200];
        sizes.extend([100u64; 5]);
        let c = SyntheticCorpus::from_sizes(sizes, 1).unwrap();
        // one size-100 sample fits alone but never with 7 others padded to 100
        let r = run_static(&c, 8, &quad, 10_000.0, 4, 3).unwrap();
        assert_eq!(r.size_histogram.get(&100), None);
        assert_eq!(r.emitted + r.skipped, 4 * 205);
        let r1 = run_static(&c, 1, &quad, 10_000.0, 1, 3).unwrap();
        assert_eq!(r1.skipped, 0);
    }

    #[test]
    fn adaptive_single_group_and_conservation() {
        let c = SyntheticCorpus::from_sizes(vec![5; 23], 1).unwrap();
        let r = run_adaptive(&c, 1, &quad, 100.0, 2, 0).unwrap();
        assert_eq!(r.batch_sizes(), vec![4, 4, 4, 4, 4, 3, 4, 4, 4, 4, 4, 3]);
        assert_eq!(r.emitted, 46);
        assert_eq!(r.padding.total_padding(), 0);
        // each epoch is a full cycle of the group
        assert_eq!(r.size_histogram[&5], 46);
    }

    #[test]
    fn adaptive_all_over_budget() {
        let c = SyntheticCorpus::from_sizes(vec![50, 60, 70], 1).unwrap();
        let r = run_adaptive(&c, 4, &quad, 10.0, 5, 0).unwrap();
        assert_eq!((r.emitted, r.skipped, r.batches), (0, 15, 0));
        assert!(r.size_histogram.is_empty());
    }

    #[test]
    fn bucketed_single_size_pads_nothing() {
        let c = SyntheticCorpus::from_sizes(vec![7; 40], 3).unwrap();
        let spec = create_buckets(&c.sizes, 2, 4).unwrap();
        let r = run_bucketed(&c, &spec, &quad, 200.0, 3, 9).unwrap();
        assert_eq!(r.emitted, 120);
        assert!(r.padding.per_batch_padding().iter().all(|&p| p == 0));
    }

    #[test]
    fn reports_are_seeded() {
        let c = SyntheticCorpus::from_sizes((0..300).map(|i| 1 + i % 37).collect(), 2).unwrap();
        let a = run_adaptive(&c, 5, &quad, 900.0, 2, 4).unwrap();
        let b = run_adaptive(&c, 5, &quad, 900.0, 2, 4).unwrap();
        assert_eq!(a.padding, b.padding);
        assert_eq!(a.size_histogram, b.size_histogram);
    }

    #[test]
    fn metrics() {
        let a = BTreeMap::from([(1, 1), (2, 1)]);
        let b = BTreeMap::from([(2, 2), (3, 2)]);
        assert!((tv_distance(&a, &b) - 0.5).abs() < 1e-12);
        assert_eq!(tv_distance(&a, &a), 0.0);
        assert!((mass_at_or_above(&b, 3) - 0.5).abs() < 1e-12);
        assert!((share_ratio(&a, &b, 2) - 1.0).abs() < 1e-12);
        assert!(share_ratio(&a, &b, 1).is_nan());
    }

    #[test]
    fn padded_cost_uses_elementwise_max() {
        let f = vec![vec![1.0, 9.0], vec![4.0, 2.0]];
        let sum = |x: &[f64]| x[0] + x[1];
        assert_eq!(padded_batch_cost(&f, &[0, 1], &sum), 26.0);
        assert_eq!(padded_batch_cost(&f, &[], &sum), 0.0);
    }
}
