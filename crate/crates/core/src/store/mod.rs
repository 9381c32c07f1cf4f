//! Memory-mapped CSR matrix stores.
//!
//! A store is a directory:
//!
//! ```text
//! header.json        format_version, n_rows, n_cols, nnz, widths, metadata columns
//! rowptr.bin         (n_rows + 1) x u64 LE
//! colidx.bin         nnz x u64 LE
//! values.bin         nnz x f32 LE
//! meta/<column>.bin  see [`meta`]
//! ```
//!
//! Opening maps the arrays and checks file sizes against the header plus the
//! first and last row pointer. The full invariant scan lives in
//! [`SparseMatrixStore::validate_deep`].

mod header;
mod ingest;
mod mapped;
pub mod meta;
mod writer;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use header::{ColumnSpec, StoreHeader, FORMAT_VERSION};
pub use ingest::{
    build_store, canonicalize, read_coordinates, CanonicalCsr, ConversionReport, Coordinates,
};
pub use meta::{ColumnData, MetaDType, MetaValue, MetadataColumn};
pub use writer::StoreWriter;
pub(crate) use writer::prepare_out_dir;

use header::{COLIDX_FILE, META_DIR, ROWPTR_FILE, VALUES_FILE};
use mapped::Mapped;
use meta::MappedColumn;

use crate::{Error, Result};

/// One row of a store, borrowed from the mapped arrays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowSlice<'a> {
    pub row_index: u64,
    pub cols: &'a [u64],
    pub vals: &'a [f32],
}

impl RowSlice<'_> {
    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }
}

/// Read-only handle on an on-disk store. Cheap to share across threads.
#[derive(Debug)]
pub struct SparseMatrixStore {
    dir: PathBuf,
    header: StoreHeader,
    row_ptr: Mapped,
    col_idx: Mapped,
    values: Mapped,
    metadata: BTreeMap<String, MappedColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeepReport {
    pub rows_checked: u64,
    pub entries_checked: u64,
    pub metadata_columns_checked: usize,
}

impl SparseMatrixStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let header = header::StoreHeader::read(&dir)?;

        let row_ptr = Mapped::open(&dir.join(ROWPTR_FILE))?;
        let col_idx = Mapped::open(&dir.join(COLIDX_FILE))?;
        let values = Mapped::open(&dir.join(VALUES_FILE))?;

        let expect = |name: &str, got: usize, want: u64| -> Result<()> {
            if got as u64 != want {
                return Err(Error::Corruption(format!(
                    "{name}: header implies {want} bytes, file has {got}"
                )));
            }
            Ok(())
        };
        expect(ROWPTR_FILE, row_ptr.len(), (header.n_rows + 1) * 8)?;
        expect(COLIDX_FILE, col_idx.len(), header.nnz * 8)?;
        expect(VALUES_FILE, values.len(), header.nnz * 4)?;

        let ptr: &[u64] = row_ptr.cast(ROWPTR_FILE)?;
        if ptr[0] != 0 {
            return Err(Error::Corruption(format!("row_ptr[0] = {}, expected 0", ptr[0])));
        }
        if ptr[ptr.len() - 1] != header.nnz {
            return Err(Error::Corruption(format!(
                "row_ptr[n_rows] = {}, header nnz = {}",
                ptr[ptr.len() - 1],
                header.nnz
            )));
        }

        let mut metadata = BTreeMap::new();
        for spec in &header.metadata {
            meta::validate_column_name(&spec.name)
                .map_err(|_| Error::Corruption(format!("bad metadata column name `{}`", spec.name)))?;
            let path = dir.join(META_DIR).join(format!("{}.bin", spec.name));
            let col = MappedColumn::open(&path, spec.dtype, header.n_rows)?;
            metadata.insert(spec.name.clone(), col);
        }

        Ok(Self { dir, header, row_ptr, col_idx, values, metadata })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    pub fn n_rows(&self) -> u64 {
        self.header.n_rows
    }

    pub fn n_cols(&self) -> u64 {
        self.header.n_cols
    }

    pub fn nnz(&self) -> u64 {
        self.header.nnz
    }

    pub fn row_ptr(&self) -> &[u64] {
        self.row_ptr.cast(ROWPTR_FILE).expect("size checked at open")
    }

    pub fn col_idx(&self) -> &[u64] {
        self.col_idx.cast(COLIDX_FILE).expect("size checked at open")
    }

    pub fn values(&self) -> &[f32] {
        self.values.cast(VALUES_FILE).expect("size checked at open")
    }

    pub fn get_row(&self, r: u64) -> Result<RowSlice<'_>> {
        if r >= self.header.n_rows {
            return Err(Error::IndexOutOfRange { index: r, len: self.header.n_rows });
        }
        let ptr = self.row_ptr();
        let (lo, hi) = (ptr[r as usize], ptr[r as usize + 1]);
        if lo > hi || hi > self.header.nnz {
            return Err(Error::Corruption(format!("row {r} has bad extent {lo}..{hi}")));
        }
        let (lo, hi) = (lo as usize, hi as usize);
        Ok(RowSlice {
            row_index: r,
            cols: &self.col_idx()[lo..hi],
            vals: &self.values()[lo..hi],
        })
    }

    pub fn rows(&self) -> impl Iterator<Item = Result<RowSlice<'_>>> + '_ {
        (0..self.header.n_rows).map(move |r| self.get_row(r))
    }

    pub fn metadata_columns(&self) -> &[ColumnSpec] {
        &self.header.metadata
    }

    pub fn get_metadata(&self, column: &str, r: u64) -> Result<MetaValue<'_>> {
        let col = self
            .metadata
            .get(column)
            .ok_or_else(|| Error::UnknownColumn(column.to_owned()))?;
        if r >= self.header.n_rows {
            return Err(Error::IndexOutOfRange { index: r, len: self.header.n_rows });
        }
        col.get(r as usize)
    }

    /// Full scan of every invariant: monotone row pointers, strictly
    /// increasing in-range columns, finite values, and metadata record counts.
    pub fn validate_deep(&self) -> Result<DeepReport> {
        let ptr = self.row_ptr();
        let cols = self.col_idx();
        let vals = self.values();
        for r in 0..self.header.n_rows as usize {
            let (lo, hi) = (ptr[r], ptr[r + 1]);
            if lo > hi || hi > self.header.nnz {
                return Err(Error::Corruption(format!("row_ptr not monotone at row {r}: {lo} > {hi}")));
            }
            let row = &cols[lo as usize..hi as usize];
            if let Some(&c) = row.iter().find(|&&c| c >= self.header.n_cols) {
                return Err(Error::Corruption(format!(
                    "row {r}: column {c} >= n_cols {}",
                    self.header.n_cols
                )));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Corruption(format!("row {r}: columns not strictly increasing")));
            }
        }
        if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
            return Err(Error::Corruption(format!("non-finite value at entry {i}")));
        }
        for (name, col) in &self.metadata {
            let n = col.count()?;
            if n as u64 != self.header.n_rows {
                return Err(Error::Corruption(format!(
                    "metadata column `{name}` holds {n} records, expected {}",
                    self.header.n_rows
                )));
            }
            if col.dtype == MetaDType::String {
                for r in 0..n {
                    col.get(r)?;
                }
            }
        }
        Ok(DeepReport {
            rows_checked: self.header.n_rows,
            entries_checked: self.header.nnz,
            metadata_columns_checked: self.metadata.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn example_store(dir: &Path) -> SparseMatrixStore {
        let mut w = StoreWriter::create(dir, 4, false).unwrap();
        w.push_row(&[1, 3], &[2.0, 1.0]).unwrap();
        w.push_row(&[], &[]).unwrap();
        w.push_row(&[0], &[5.0]).unwrap();
        w.add_metadata(
            MetadataColumn::new("cell_type", ColumnData::Str(vec!["T".into(), "".into(), "B cell".into()]))
                .unwrap(),
        )
        .unwrap();
        w.add_metadata(MetadataColumn::new("depth", ColumnData::Int(vec![1, -2, 3])).unwrap())
            .unwrap();
        w.finish().unwrap();
        SparseMatrixStore::open(dir).unwrap()
    }

    #[test]
    fn rows_and_metadata() {
        let tmp = tempfile::tempdir().unwrap();
        let store = example_store(&tmp.path().join("s"));
        assert_eq!(store.row_ptr(), &[0, 2, 2, 3]);
        let r0 = store.get_row(0).unwrap();
        assert_eq!((r0.cols, r0.vals), (&[1u64, 3][..], &[2.0f32, 1.0][..]));
        assert!(store.get_row(1).unwrap().is_empty());
        assert_eq!(store.get_row(2).unwrap().vals, &[5.0]);
        assert!(matches!(store.get_row(3), Err(Error::IndexOutOfRange { index: 3, len: 3 })));

        assert_eq!(store.get_metadata("cell_type", 2).unwrap(), MetaValue::Str("B cell"));
        assert_eq!(store.get_metadata("cell_type", 1).unwrap(), MetaValue::Str(""));
        assert_eq!(store.get_metadata("depth", 1).unwrap(), MetaValue::Int(-2));
        assert!(matches!(store.get_metadata("foo", 0), Err(Error::UnknownColumn(_))));
        store.validate_deep().unwrap();
    }

    #[test]
    fn truncated_values_is_corruption() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s");
        drop(example_store(&dir));
        let values = dir.join(VALUES_FILE);
        let bytes = fs::read(&values).unwrap();
        fs::write(&values, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(SparseMatrixStore::open(&dir), Err(Error::Corruption(_))));
    }

    #[test]
    fn version_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s");
        drop(example_store(&dir));
        let path = dir.join("header.json");
        let text = fs::read_to_string(&path).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            SparseMatrixStore::open(&dir),
            Err(Error::UnsupportedVersion { found: 7, supported: 1 })
        ));
    }

    #[test]
    fn deep_scan_catches_unsorted_columns() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s");
        drop(example_store(&dir));
        // swap the two column indices of row 0 in place
        let path = dir.join(COLIDX_FILE);
        let mut bytes = fs::read(&path).unwrap();
        let (a, b) = bytes.split_at_mut(8);
        a.swap_with_slice(&mut b[..8]);
        fs::write(&path, bytes).unwrap();
        let store = SparseMatrixStore::open(&dir).unwrap();
        assert!(matches!(store.validate_deep(), Err(Error::Corruption(_))));
    }

    #[test]
    fn writer_rejects_bad_rows_and_existing_dir() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("s");
        let mut w = StoreWriter::create(&dir, 3, false).unwrap();
        assert!(w.push_row(&[2, 1], &[1.0, 1.0]).is_err());
        assert!(w.push_row(&[3], &[1.0]).is_err());
        assert!(w.push_row(&[0], &[]).is_err());
        w.push_row(&[0], &[1.0]).unwrap();
        w.add_metadata(MetadataColumn::new("x", ColumnData::Float(vec![1.0, 2.0])).unwrap())
            .unwrap();
        assert!(matches!(w.finish(), Err(Error::Dimension(_))));

        assert!(matches!(StoreWriter::create(&dir, 3, false), Err(Error::OutputExists(_))));
        StoreWriter::create(&dir, 3, true).unwrap().finish().unwrap();
        let store = SparseMatrixStore::open(&dir).unwrap();
        assert_eq!((store.n_rows(), store.nnz()), (0, 0));
    }
}
