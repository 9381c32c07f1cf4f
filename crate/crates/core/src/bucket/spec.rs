use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Half-open size interval `[lo, hi)` and the samples whose size falls in it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bucket {
    pub lo: u64,
    pub hi: u64,
    pub members: Vec<usize>,
}

impl Bucket {
    pub fn width(&self) -> u64 {
        self.hi - self.lo
    }

    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, size: u64) -> bool {
        self.lo <= size && size < self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketSpec {
    pub buckets: Vec<Bucket>,
    pub max_width: u64,
    pub min_count: usize,
    /// The last bucket holds fewer than `min_count` samples.
    pub tail_deficit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub boundaries: Vec<[u64; 2]>,
    pub member_counts: Vec<usize>,
    pub max_width: u64,
    pub min_count: usize,
    pub tail_deficit: bool,
}

impl BucketSpec {
    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn boundaries(&self) -> Vec<(u64, u64)> {
        self.buckets.iter().map(|b| (b.lo, b.hi)).collect()
    }

    /// Index of the bucket whose interval contains `size`.
    pub fn bucket_of(&self, size: u64) -> Option<usize> {
        let i = self.buckets.partition_point(|b| b.hi <= size);
        self.buckets.get(i).filter(|b| b.contains(size)).map(|_| i)
    }

    pub fn summary(&self) -> BucketSummary {
        BucketSummary {
            boundaries: self.buckets.iter().map(|b| [b.lo, b.hi]).collect(),
            member_counts: self.buckets.iter().map(Bucket::count).collect(),
            max_width: self.max_width,
            min_count: self.min_count,
            tail_deficit: self.tail_deficit,
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.summary()).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Greedy ascending sweep over the distinct sizes. The open bucket takes the
/// next size if the bucket would still be at most `max_width` wide, or if it
/// holds fewer than `min_count` samples; otherwise it closes just above its
/// largest member and the next size opens a new bucket. Only the last bucket
/// can end up short of `min_count`, which sets `tail_deficit`.
pub fn create_buckets(sizes: &[u64], max_width: u64, min_count: usize) -> Result<BucketSpec> {
    if sizes.is_empty() {
        return Err(Error::EmptyInput("bucket sizes"));
    }
    if max_width == 0 {
        return Err(Error::Validation("max_width must be positive".into()));
    }
    if min_count == 0 {
        return Err(Error::Validation("min_count must be at least 1".into()));
    }
    if sizes.contains(&u64::MAX) {
        return Err(Error::Validation("size u64::MAX leaves no room for a half-open bound".into()));
    }

    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| (sizes[i], i));

    let mut buckets: Vec<Bucket> = Vec::new();
    let mut open: Option<Bucket> = None;
    let mut i = 0;
    while i < order.len() {
        let size = sizes[order[i]];
        let mut j = i;
        while j < order.len() && sizes[order[j]] == size {
            j += 1;
        }
        let group = &order[i..j];

        match open.as_mut() {
            Some(b) if size + 1 - b.lo <= max_width || b.count() < min_count => {
                b.members.extend_from_slice(group);
                b.hi = size + 1;
            }
            _ => {
                if let Some(done) = open.take() {
                    buckets.push(done);
                }
                open = Some(Bucket { lo: size, hi: size + 1, members: group.to_vec() });
            }
        }
        i = j;
    }
    buckets.extend(open);

    for b in &mut buckets {
        b.members.sort_unstable();
    }
    let tail_deficit = buckets.last().is_some_and(|b| b.count() < min_count);
    Ok(BucketSpec { buckets, max_width, min_count, tail_deficit })
}
