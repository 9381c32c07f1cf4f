use std::collections::BTreeMap;
use std::path::Path;

use crate::sizeaware::Batch;
use crate::{Error, Result};

/// Named tensor dimensions of one sample, e.g. `{"nodes": [n, w], "adj": [n, n]}`.
pub type TensorShapes = BTreeMap<String, Vec<u64>>;

/// Elements added when every tensor of the batch is padded to the per-axis
/// maximum: for each named tensor,
/// `|batch| * prod(max dims) - sum over samples of prod(sample dims)`.
pub fn padding_elements<F>(batch: &Batch, shapes: F) -> Result<u64>
where
    F: FnMut(usize) -> TensorShapes,
{
    padding_for_indices(&batch.indices, shapes)
}

pub fn padding_for_indices<F>(indices: &[usize], mut shapes: F) -> Result<u64>
where
    F: FnMut(usize) -> TensorShapes,
{
    let Some((&first, rest)) = indices.split_first() else {
        return Ok(0);
    };
    let first_shapes = shapes(first);
    let mut max_dims = first_shapes.clone();
    let mut actual: BTreeMap<&str, u128> = BTreeMap::new();
    for (name, dims) in &first_shapes {
        *actual.entry(name).or_default() += volume(dims)?;
    }
    let mut per_sample = Vec::with_capacity(rest.len());
    for &i in rest {
        per_sample.push((i, shapes(i)));
    }
    for (i, sample) in &per_sample {
        if sample.len() != first_shapes.len() || sample.keys().any(|k| !first_shapes.contains_key(k)) {
            return Err(Error::Shape(format!(
                "sample {i} has tensors {:?}, sample {first} has {:?}",
                sample.keys().collect::<Vec<_>>(),
                first_shapes.keys().collect::<Vec<_>>()
            )));
        }
        for (name, dims) in sample {
            let max = max_dims.get_mut(name).expect("same key set");
            if dims.len() != max.len() {
                return Err(Error::Shape(format!(
                    "tensor `{name}`: sample {i} has rank {}, sample {first} has rank {}",
                    dims.len(),
                    max.len()
                )));
            }
            for (m, &d) in max.iter_mut().zip(dims) {
                *m = (*m).max(d);
            }
            *actual.get_mut(name.as_str()).expect("same key set") += volume(dims)?;
        }
    }

    let n = indices.len() as u128;
    let mut padding: u128 = 0;
    for (name, dims) in &max_dims {
        let padded = n
            .checked_mul(volume(dims)?)
            .ok_or_else(|| Error::Shape(format!("tensor `{name}` padded size overflows")))?;
        padding += padded - actual[name.as_str()];
    }
    u64::try_from(padding).map_err(|_| Error::Shape("padding count exceeds u64".into()))
}

fn volume(dims: &[u64]) -> Result<u128> {
    dims.iter()
        .try_fold(1u128, |acc, &d| acc.checked_mul(u128::from(d)))
        .ok_or_else(|| Error::Shape(format!("tensor volume of {dims:?} overflows")))
}

/// Padding per emitted batch, as written to `padding.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PaddingReport {
    pub rows: Vec<PaddingRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PaddingRow {
    pub batch_id: usize,
    pub padding_elements: u64,
    pub batch_cardinality: usize,
    pub max_size: u64,
}

impl PaddingReport {
    pub fn push(&mut self, padding_elements: u64, batch_cardinality: usize, max_size: u64) {
        let batch_id = self.rows.len();
        self.rows.push(PaddingRow { batch_id, padding_elements, batch_cardinality, max_size });
    }

    pub fn per_batch_padding(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.padding_elements).collect()
    }

    pub fn total_padding(&self) -> u64 {
        self.rows.iter().map(|r| r.padding_elements).sum()
    }

    /// Lower median of per-batch padding; 0 when there are no batches.
    pub fn median_padding(&self) -> u64 {
        let mut v = self.per_batch_padding();
        if v.is_empty() {
            return 0;
        }
        let mid = (v.len() - 1) / 2;
        *v.select_nth_unstable(mid).1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("batch_id,padding_elements,batch_cardinality,max_size\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.batch_id, r.padding_elements, r.batch_cardinality, r.max_size
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
