//! Conversion from Matrix Market coordinate text into a store.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::meta::read_tsv;
use super::writer::StoreWriter;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversionReport {
    pub rows_in: u64,
    pub entries_in: u64,
    pub duplicates_merged: u64,
    pub zeros_dropped: u64,
    pub nnz: u64,
    pub elapsed_secs: f64,
}

/// A parsed coordinate file: dimensions plus zero-based triples in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Coordinates {
    pub n_rows: u64,
    pub n_cols: u64,
    pub entries: Vec<(u64, u64, f64)>,
}

/// Parses 1-based coordinate text. Lines starting with `%` are comments; a
/// `%%MatrixMarket` banner, if present, must describe a general coordinate
/// matrix. `pattern` matrices take the value 1.0 for every entry.
pub fn read_coordinates(path: &Path) -> Result<Coordinates> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_coordinates(BufReader::new(file), path)
}

pub(crate) fn parse_coordinates<R: BufRead>(reader: R, path: &Path) -> Result<Coordinates> {
    let mut pattern = false;
    let mut dims: Option<(u64, u64, u64)> = None;
    let mut entries = Vec::new();
    let mut last_line = 0;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if let Some(banner) = trimmed.strip_prefix("%%MatrixMarket") {
            if line_no == 1 {
                pattern = parse_banner(banner, line_no)?;
            }
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let Some((n_rows, n_cols, nnz)) = dims else {
            let n_rows = parse_field::<u64>(fields.next(), "rows", line_no)?;
            let n_cols = parse_field::<u64>(fields.next(), "cols", line_no)?;
            let nnz = parse_field::<u64>(fields.next(), "nnz", line_no)?;
            if fields.next().is_some() {
                return Err(parse_err(line_no, "size line must be `rows cols nnz`"));
            }
            dims = Some((n_rows, n_cols, nnz));
            entries.reserve(nnz.min(1 << 24) as usize);
            continue;
        };

        let row = parse_field::<u64>(fields.next(), "row", line_no)?;
        let col = parse_field::<u64>(fields.next(), "col", line_no)?;
        let val = if pattern {
            1.0
        } else {
            parse_field::<f64>(fields.next(), "value", line_no)?
        };
        if fields.next().is_some() {
            return Err(parse_err(line_no, "trailing fields after entry"));
        }
        if row == 0 || row > n_rows {
            return Err(parse_err(line_no, format!("row {row} outside 1..={n_rows}")));
        }
        if col == 0 || col > n_cols {
            return Err(parse_err(line_no, format!("column {col} outside 1..={n_cols}")));
        }
        if !val.is_finite() {
            return Err(parse_err(line_no, format!("non-finite value {val}")));
        }
        if entries.len() as u64 == nnz {
            return Err(parse_err(line_no, format!("more entries than the declared {nnz}")));
        }
        entries.push((row - 1, col - 1, val));
    }

    let Some((n_rows, n_cols, nnz)) = dims else {
        return Err(parse_err(last_line.max(1), "missing `rows cols nnz` size line"));
    };
    if entries.len() as u64 != nnz {
        return Err(parse_err(
            last_line.max(1),
            format!("declared {nnz} entries but found {}", entries.len()),
        ));
    }
    Ok(Coordinates { n_rows, n_cols, entries })
}

fn parse_banner(banner: &str, line_no: usize) -> Result<bool> {
    let words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    let [object, format, field, symmetry] = words.as_slice() else {
        return Err(parse_err(line_no, "banner must be `%%MatrixMarket matrix coordinate <field> <symmetry>`"));
    };
    if object != "matrix" || format != "coordinate" {
        return Err(parse_err(line_no, format!("unsupported matrix kind `{object} {format}`")));
    }
    if symmetry != "general" {
        return Err(parse_err(line_no, format!("unsupported symmetry `{symmetry}`")));
    }
    match field.as_str() {
        "real" | "integer" | "double" => Ok(false),
        "pattern" => Ok(true),
        other => Err(parse_err(line_no, format!("unsupported field type `{other}`"))),
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, what: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let field = field.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    field
        .parse()
        .map_err(|e| parse_err(line, format!("bad {what} `{field}`: {e}")))
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Canonical CSR built from coordinates: rows sorted by column, duplicates
/// summed, zero sums dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalCsr {
    pub n_rows: u64,
    pub n_cols: u64,
    pub row_ptr: Vec<u64>,
    pub col_idx: Vec<u64>,
    pub values: Vec<f32>,
    pub duplicates_merged: u64,
    pub zeros_dropped: u64,
}

pub fn canonicalize(coords: Coordinates) -> CanonicalCsr {
    let Coordinates { n_rows, n_cols, mut entries } = coords;
    // stable: duplicates are summed in file order
    entries.sort_by_key(|&(r, c, _)| (r, c));

    let mut row_ptr = Vec::with_capacity(n_rows as usize + 1);
    row_ptr.push(0u64);
    let mut col_idx = Vec::with_capacity(entries.len());
    let mut values = Vec::with_capacity(entries.len());
    let mut duplicates_merged = 0;
    let mut zeros_dropped = 0;

    let mut i = 0;
    let mut row = 0u64;
    while i < entries.len() {
        let (r, c, mut sum) = entries[i];
        let mut j = i + 1;
        while j < entries.len() && entries[j].0 == r && entries[j].1 == c {
            sum += entries[j].2;
            j += 1;
        }
        duplicates_merged += (j - i - 1) as u64;
        while row < r {
            row_ptr.push(col_idx.len() as u64);
            row += 1;
        }
        let stored = sum as f32;
        if stored == 0.0 {
            zeros_dropped += 1;
        } else {
            col_idx.push(c);
            values.push(stored);
        }
        i = j;
    }
    while row < n_rows {
        row_ptr.push(col_idx.len() as u64);
        row += 1;
    }

    CanonicalCsr { n_rows, n_cols, row_ptr, col_idx, values, duplicates_merged, zeros_dropped }
}

/// Converts a coordinate file (plus optional tab-separated row metadata) into
/// a store under `out_dir`.
pub fn build_store(
    ingest_path: impl AsRef<Path>,
    metadata_path: Option<&Path>,
    out_dir: impl AsRef<Path>,
    overwrite: bool,
) -> Result<ConversionReport> {
    let start = Instant::now();
    let coords = read_coordinates(ingest_path.as_ref())?;
    let entries_in = coords.entries.len() as u64;

    let metadata = match metadata_path {
        Some(p) => {
            let cols = read_tsv(p)?;
            for col in &cols {
                if col.data.len() as u64 != coords.n_rows {
                    return Err(Error::Dimension(format!(
                        "metadata table has {} rows, matrix has {}",
                        col.data.len(),
                        coords.n_rows
                    )));
                }
            }
            cols
        }
        None => Vec::new(),
    };

    let csr = canonicalize(coords);
    let mut writer = StoreWriter::create(out_dir, csr.n_cols, overwrite)?;
    for w in csr.row_ptr.windows(2) {
        let (lo, hi) = (w[0] as usize, w[1] as usize);
        writer.push_row(&csr.col_idx[lo..hi], &csr.values[lo..hi])?;
    }
    for col in metadata {
        writer.add_metadata(col)?;
    }
    let header = writer.finish()?;

    Ok(ConversionReport {
        rows_in: csr.n_rows,
        entries_in,
        duplicates_merged: csr.duplicates_merged,
        zeros_dropped: csr.zeros_dropped,
        nnz: header.nnz,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}
