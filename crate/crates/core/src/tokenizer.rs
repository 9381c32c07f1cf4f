//! Rank-order tokenization of expression rows.
//!
//! Each expressed gene is scored by its value divided by the gene's corpus
//! median over nonzero values; genes are emitted by descending score (ties by
//! ascending gene index) as token ids `gene + 2`, truncated to `max_len`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::store::{RowSlice, SparseMatrixStore};
use crate::{Error, Result};

pub const PAD_TOKEN: u32 = 0;
pub const MASK_TOKEN: u32 = 1;
pub const GENE_TOKEN_OFFSET: u32 = 2;

const STATS_FILE: &str = "genestats.json";
const MEDIANS_FILE: &str = "medians.bin";
const STATS_VERSION: u32 = 1;

/// Scores one expressed gene. The default is [`GeneStats`] median
/// normalization; other recipes can plug in here.
pub trait ExpressionScorer {
    fn score(&self, gene: u64, value: f32) -> f64;
}

/// Per-gene median of nonzero values, 1.0 for genes never expressed.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneStats {
    medians: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct StatsFile {
    version: u32,
    n_cols: u64,
    medians: String,
}

impl GeneStats {
    pub fn from_medians(medians: Vec<f32>) -> Result<Self> {
        if let Some((g, m)) = medians.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::Validation(format!("median for gene {g} must be positive and finite, got {m}")));
        }
        if medians.len() as u64 > u64::from(u32::MAX - GENE_TOKEN_OFFSET) + 1 {
            return Err(Error::Validation(format!("{} genes do not fit 32-bit token ids", medians.len())));
        }
        Ok(Self { medians })
    }

    pub fn n_cols(&self) -> u64 {
        self.medians.len() as u64
    }

    pub fn medians(&self) -> &[f32] {
        &self.medians
    }

    /// Writes `genestats.json` and its `medians.bin` sidecar into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let bin = dir.join(MEDIANS_FILE);
        fs::write(&bin, bytemuck::cast_slice::<f32, u8>(&self.medians)).map_err(|e| Error::io(&bin, e))?;
        let json = dir.join(STATS_FILE);
        let doc = StatsFile { version: STATS_VERSION, n_cols: self.n_cols(), medians: MEDIANS_FILE.into() };
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::json(&json, e))?;
        fs::write(&json, text).map_err(|e| Error::io(&json, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let json = dir.join(STATS_FILE);
        let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let doc: StatsFile = serde_json::from_str(&text).map_err(|e| Error::json(&json, e))?;
        if doc.version != STATS_VERSION {
            return Err(Error::UnsupportedVersion { found: doc.version, supported: STATS_VERSION });
        }
        let bin = dir.join(&doc.medians);
        let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
        if bytes.len() as u64 != doc.n_cols * 4 {
            return Err(Error::Corruption(format!(
                "{}: expected {} bytes for {} genes, found {}",
                bin.display(),
                doc.n_cols * 4,
                doc.n_cols,
                bytes.len()
            )));
        }
        let medians = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        Self::from_medians(medians).map_err(|e| Error::Corruption(e.to_string()))
    }

    pub fn exists_in(dir: &Path) -> bool {
        dir.join(STATS_FILE).is_file()
    }
}

impl ExpressionScorer for GeneStats {
    fn score(&self, gene: u64, value: f32) -> f64 {
        let median = self.medians[gene as usize];
        f64::from(value) / f64::from(median)
    }
}

/// Median over a multiset given as `(value, count)` pairs.
fn median_of_counts(mut counts: Vec<(f32, u64)>) -> Option<f64> {
    let total: u64 = counts.iter().map(|&(_, c)| c).sum();
    if total == 0 {
        return None;
    }
    counts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nth = |k: u64| -> f32 {
        let mut seen = 0;
        for &(v, c) in &counts {
            seen += c;
            if k < seen {
                return v;
            }
        }
        unreachable!("k < total")
    };
    Some(if total % 2 == 1 {
        f64::from(nth(total / 2))
    } else {
        (f64::from(nth(total / 2 - 1)) + f64::from(nth(total / 2))) / 2.0
    })
}

/// One pass over the rows. Each gene keeps a histogram of its distinct
/// nonzero values, so memory grows with distinct values per gene rather than
/// with its nonzero count; count matrices have few distinct values.
pub fn compute_gene_stats(store: &SparseMatrixStore) -> Result<GeneStats> {
    let n_cols = usize::try_from(store.n_cols())
        .map_err(|_| Error::Validation("n_cols exceeds address space".into()))?;
    let mut hist: Vec<HashMap<u32, u64>> = vec![HashMap::new(); n_cols];
    for row in store.rows() {
        let row = row?;
        for (&c, &v) in row.cols.iter().zip(row.vals) {
            if v != 0.0 {
                *hist[c as usize].entry(v.to_bits()).or_insert(0) += 1;
            }
        }
    }
    let medians = hist
        .into_iter()
        .map(|h| {
            let counts = h.into_iter().map(|(bits, c)| (f32::from_bits(bits), c)).collect();
            match median_of_counts(counts) {
                Some(m) if m > 0.0 && (m as f32) > 0.0 && m.is_finite() => m as f32,
                // unexpressed genes, or negative-valued data where a ratio is meaningless
                _ => 1.0,
            }
        })
        .collect();
    GeneStats::from_medians(medians)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenSequence {
    pub tokens: Vec<u32>,
    pub max_len: usize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub fn rank_encode(row: &RowSlice<'_>, stats: &GeneStats, max_len: usize) -> TokenSequence {
    if let Some(&g) = row.cols.iter().find(|&&g| g >= stats.n_cols()) {
        panic!("gene {g} outside gene stats with {} genes", stats.n_cols());
    }
    rank_encode_with(row.cols, row.vals, stats, max_len)
}

/// Rank encoding with an arbitrary scorer. Zero values are not expressed and
/// never produce tokens.
pub fn rank_encode_with<S: ExpressionScorer + ?Sized>(
    cols: &[u64],
    vals: &[f32],
    scorer: &S,
    max_len: usize,
) -> TokenSequence {
    let mut scored: Vec<(f64, u64)> = cols
        .iter()
        .zip(vals)
        .filter(|(_, &v)| v != 0.0)
        .map(|(&g, &v)| (scorer.score(g, v), g))
        .collect();

    let order = |a: &(f64, u64), b: &(f64, u64)| -> Ordering { b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)) };
    if max_len < scored.len() {
        if max_len > 0 {
            scored.select_nth_unstable_by(max_len - 1, order);
        }
        scored.truncate(max_len);
    }
    scored.sort_unstable_by(order);

    TokenSequence {
        tokens: scored.into_iter().map(|(_, g)| g as u32 + GENE_TOKEN_OFFSET).collect(),
        max_len,
    }
}
