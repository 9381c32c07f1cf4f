use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::store::SparseMatrixStore;
use crate::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// FNV-1a over the row index, then each (column, value bits) pair in
/// little-endian order.
pub fn row_checksum(row: u64, cols: &[u64], vals: &[f32]) -> u64 {
    let mut h = fnv(FNV_OFFSET, &row.to_le_bytes());
    for (c, v) in cols.iter().zip(vals) {
        h = fnv(h, &c.to_le_bytes());
        h = fnv(h, &v.to_bits().to_le_bytes());
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochTiming {
    pub epoch: u64,
    pub secs: f64,
    pub rows: u64,
    pub rows_per_sec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateReport {
    pub n_rows: u64,
    pub nnz: u64,
    pub epochs: Vec<EpochTiming>,
    /// Mean over epochs; 0 when no epoch ran.
    pub rows_per_sec: f64,
    /// Wrapping sum of [`row_checksum`] over all rows; `None` when no epoch ran.
    pub checksum: Option<u64>,
}

/// Reads every row of the store `epochs` times, timing each pass.
pub fn bench_iterate(store_dir: &Path, epochs: u64) -> Result<IterateReport> {
    let store = SparseMatrixStore::open(store_dir)?;
    let mut report = IterateReport {
        n_rows: store.n_rows(),
        nnz: store.nnz(),
        epochs: Vec::new(),
        rows_per_sec: 0.0,
        checksum: None,
    };
    for epoch in 0..epochs {
        let start = Instant::now();
        let mut sum = 0u64;
        let mut rows = 0u64;
        for row in store.rows() {
            let row = row?;
            sum = sum.wrapping_add(row_checksum(row.row_index, row.cols, row.vals));
            rows += 1;
        }
        let secs = start.elapsed().as_secs_f64();
        match report.checksum {
            Some(prev) if prev != sum => {
                return Err(Error::Corruption(format!("checksum changed between epochs ({prev:#x} vs {sum:#x})")))
            }
            _ => report.checksum = Some(sum),
        }
        let rows_per_sec = if secs > 0.0 { rows as f64 / secs } else { f64::INFINITY };
        report.epochs.push(EpochTiming { epoch, secs, rows, rows_per_sec });
    }
    if !report.epochs.is_empty() {
        report.rows_per_sec = report.epochs.iter().map(|e| e.rows_per_sec).sum::<f64>() / report.epochs.len() as f64;
    }
    Ok(report)
}
