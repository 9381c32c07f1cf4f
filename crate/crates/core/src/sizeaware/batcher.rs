use serde::Serialize;

use super::model::CostPredictor;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub predicted_cost: f64,
    /// Filled in by padding accounting when the batch is collated densely.
    pub padding_elements: Option<u64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Greedy batcher over a sample order: a sample joins the open batch while
/// the accumulated predicted cost stays within budget, otherwise the batch is
/// emitted and a new one opened. Samples that exceed the budget on their own
/// are skipped and recorded.
#[derive(Debug)]
pub struct SizeAwareBatcher<'a, P: ?Sized, I> {
    order: I,
    model: &'a P,
    features: &'a [Vec<f64>],
    budget: f64,
    current: Vec<usize>,
    current_cost: f64,
    skipped: Vec<usize>,
    consumed: usize,
    emitted: usize,
}

pub fn size_aware_batches<'a, P, I>(
    order: I,
    model: &'a P,
    features: &'a [Vec<f64>],
    budget: f64,
) -> Result<SizeAwareBatcher<'a, P, I::IntoIter>>
where
    P: CostPredictor + ?Sized,
    I: IntoIterator<Item = usize>,
{
    if !(budget > 0.0) {
        return Err(Error::Validation(format!("budget must be positive, got {budget}")));
    }
    Ok(SizeAwareBatcher {
        order: order.into_iter(),
        model,
        features,
        budget,
        current: Vec::new(),
        current_cost: 0.0,
        skipped: Vec::new(),
        consumed: 0,
        emitted: 0,
    })
}

impl<P: CostPredictor + ?Sized, I> SizeAwareBatcher<'_, P, I> {
    /// Indices skipped so far because their own cost exceeds the budget.
    pub fn skipped(&self) -> &[usize] {
        &self.skipped
    }

    pub fn skipped_count(&self) -> usize {
        self.skipped.len()
    }

    /// Samples pulled from the order so far, including the open batch.
    pub fn consumed(&self) -> usize {
        self.consumed
    }

    /// Samples placed in emitted batches so far.
    pub fn emitted(&self) -> usize {
        self.emitted
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    fn take_current(&mut self) -> Batch {
        let indices = std::mem::take(&mut self.current);
        self.emitted += indices.len();
        Batch {
            indices,
            predicted_cost: std::mem::replace(&mut self.current_cost, 0.0),
            padding_elements: None,
        }
    }
}

impl<P, I> Iterator for SizeAwareBatcher<'_, P, I>
where
    P: CostPredictor + ?Sized,
    I: Iterator<Item = usize>,
{
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        for idx in self.order.by_ref() {
            self.consumed += 1;
            let cost = self.model.predict(&self.features[idx]);
            if cost.is_nan() || cost > self.budget {
                self.skipped.push(idx);
                continue;
            }
            let total = self.current_cost + cost;
            if total <= self.budget {
                self.current.push(idx);
                self.current_cost = total;
            } else {
                let out = self.take_current();
                self.current.push(idx);
                self.current_cost = cost;
                return Some(out);
            }
        }
        if self.current.is_empty() {
            None
        } else {
            Some(self.take_current())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_features(costs: &[f64]) -> Vec<Vec<f64>> {
        costs.iter().map(|&c| vec![c]).collect()
    }

    fn identity(x: &[f64]) -> f64 {
        x[0]
    }

    fn run(costs: &[f64], budget: f64) -> (Vec<Vec<usize>>, Vec<usize>) {
        let feats = unit_features(costs);
        let mut it = size_aware_batches(0..costs.len(), &identity, &feats, budget).unwrap();
        let batches: Vec<_> = it.by_ref().map(|b| b.indices).collect();
        (batches, it.skipped().to_vec())
    }

    #[test]
    fn uniform_costs() {
        let (b, s) = run(&[1.0; 9], 3.0);
        assert_eq!(b, vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8]]);
        assert!(s.is_empty());
    }

    #[test]
    fn oversized_sample_is_skipped() {
        let (b, s) = run(&[2.0, 2.0, 5.0, 1.0, 7.0], 6.0);
        assert_eq!(b, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(s, vec![4]);
    }

    #[test]
    fn empty_order() {
        let (b, s) = run(&[], 1.0);
        assert!(b.is_empty() && s.is_empty());
    }

    #[test]
    fn predicted_cost_is_accumulated() {
        let feats = unit_features(&[0.5, 0.25, 2.0]);
        let batches: Vec<_> = size_aware_batches([2, 0, 1], &identity, &feats, 2.5).unwrap().collect();
        assert_eq!(batches[0].indices, vec![2, 0]);
        assert_eq!(batches[0].predicted_cost, 2.5);
        assert_eq!(batches[1].predicted_cost, 0.25);
    }

    #[test]
    fn rejects_non_positive_budget() {
        let feats = unit_features(&[1.0]);
        assert!(size_aware_batches(0..1, &identity, &feats, 0.0).is_err());
        assert!(size_aware_batches(0..1, &identity, &feats, f64::NAN).is_err());
    }
}
