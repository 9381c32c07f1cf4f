use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::BucketSpec;
use crate::sizeaware::{size_aware_batches, Batch, CostPredictor, SizeAwareBatcher};
use crate::{Error, Result};

/// Bucketed size-aware sampling. Each epoch shuffles every bucket's members,
/// runs an independent [`SizeAwareBatcher`] per bucket, and interleaves their
/// batches by drawing the next bucket with probability proportional to the
/// samples it has not yet emitted or skipped.
#[derive(Debug, Clone)]
pub struct BucketBatchSampler<'a, P: ?Sized> {
    spec: &'a BucketSpec,
    features: &'a [Vec<f64>],
    model: &'a P,
    budget: f64,
    seed: u64,
}

impl<'a, P: CostPredictor + ?Sized> BucketBatchSampler<'a, P> {
    pub fn new(
        spec: &'a BucketSpec,
        features: &'a [Vec<f64>],
        model: &'a P,
        budget: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(budget > 0.0) {
            return Err(Error::Validation(format!("budget must be positive, got {budget}")));
        }
        if let Some(&i) = spec.buckets.iter().flat_map(|b| &b.members).find(|&&i| i >= features.len()) {
            return Err(Error::IndexOutOfRange { index: i as u64, len: features.len() as u64 });
        }
        Ok(Self { spec, features, model, budget, seed })
    }

    /// Batches for one epoch; each epoch reseeds from `seed` and the epoch
    /// number so epochs differ but replay identically.
    pub fn epoch(&self, epoch: u64) -> BucketBatches<'a, P> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch);
        let lanes = self
            .spec
            .buckets
            .iter()
            .map(|b| {
                let mut order = b.members.clone();
                order.shuffle(&mut rng);
                let batcher = size_aware_batches(order, self.model, self.features, self.budget)
                    .expect("budget validated in constructor");
                Lane { batcher, total: b.members.len() }
            })
            .collect();
        BucketBatches { lanes, rng }
    }
}

struct Lane<'a, P: ?Sized> {
    batcher: SizeAwareBatcher<'a, P, std::vec::IntoIter<usize>>,
    total: usize,
}

impl<P: CostPredictor + ?Sized> Lane<'_, P> {
    fn outstanding(&self) -> usize {
        self.total - self.batcher.emitted() - self.batcher.skipped_count()
    }
}

pub struct BucketBatches<'a, P: ?Sized> {
    lanes: Vec<Lane<'a, P>>,
    rng: ChaCha8Rng,
}

impl<P: CostPredictor + ?Sized> BucketBatches<'_, P> {
    /// Skipped sample indices across all buckets, bucket by bucket.
    pub fn skipped(&self) -> Vec<usize> {
        self.lanes.iter().flat_map(|l| l.batcher.skipped().iter().copied()).collect()
    }

    pub fn skipped_count(&self) -> usize {
        self.lanes.iter().map(|l| l.batcher.skipped_count()).sum()
    }
}

impl<P: CostPredictor + ?Sized> Iterator for BucketBatches<'_, P> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        loop {
            let total: usize = self.lanes.iter().map(Lane::outstanding).sum();
            if total == 0 {
                return None;
            }
            let mut pick = self.rng.random_range(0..total);
            let lane = self
                .lanes
                .iter_mut()
                .find(|l| {
                    let w = l.outstanding();
                    if pick < w {
                        true
                    } else {
                        pick -= w;
                        false
                    }
                })
                .expect("pick < total");
            // a lane whose remaining samples are all oversized yields nothing
            // but drains to zero outstanding, so the loop terminates
            if let Some(batch) = lane.batcher.next() {
                return Some(batch);
            }
        }
    }
}

/// Batches for a single epoch (epoch 0) of a [`BucketBatchSampler`].
pub fn bucket_batches<'a, P: CostPredictor + ?Sized>(
    spec: &'a BucketSpec,
    features: &'a [Vec<f64>],
    model: &'a P,
    budget: f64,
    seed: u64,
) -> Result<BucketBatches<'a, P>> {
    Ok(BucketBatchSampler::new(spec, features, model, budget, seed)?.epoch(0))
}
