use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::header::{
    ColumnSpec, StoreHeader, COLIDX_FILE, META_DIR, ROWPTR_FILE, VALUES_FILE,
};
use super::meta::MetadataColumn;
use crate::{Error, Result};

const BUF_CAPACITY: usize = 1 << 20;

/// Streams a CSR store to disk one row at a time.
///
/// Rows are appended in order; `header.json` is written by [`finish`] only
/// after every array has been flushed, so an interrupted build never looks
/// like a complete store.
///
/// [`finish`]: StoreWriter::finish
pub struct StoreWriter {
    dir: PathBuf,
    n_cols: u64,
    n_rows: u64,
    nnz: u64,
    row_ptr: BufWriter<File>,
    col_idx: BufWriter<File>,
    values: BufWriter<File>,
    metadata: Vec<MetadataColumn>,
}

impl StoreWriter {
    pub fn create(dir: impl AsRef<Path>, n_cols: u64, overwrite: bool) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        prepare_out_dir(&dir, overwrite)?;
        let open = |name: &str| -> Result<BufWriter<File>> {
            let path = dir.join(name);
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            Ok(BufWriter::with_capacity(BUF_CAPACITY, file))
        };
        let mut writer = Self {
            row_ptr: open(ROWPTR_FILE)?,
            col_idx: open(COLIDX_FILE)?,
            values: open(VALUES_FILE)?,
            dir,
            n_cols,
            n_rows: 0,
            nnz: 0,
            metadata: Vec::new(),
        };
        writer.write_row_ptr(0)?;
        Ok(writer)
    }

    pub fn n_rows(&self) -> u64 {
        self.n_rows
    }

    pub fn nnz(&self) -> u64 {
        self.nnz
    }

    /// Appends one row. Columns must be strictly increasing and `< n_cols`.
    pub fn push_row(&mut self, cols: &[u64], vals: &[f32]) -> Result<()> {
        if cols.len() != vals.len() {
            return Err(Error::Dimension(format!(
                "row {}: {} column indices but {} values",
                self.n_rows,
                cols.len(),
                vals.len()
            )));
        }
        if let Some(&last) = cols.last() {
            if last >= self.n_cols {
                return Err(Error::IndexOutOfRange { index: last, len: self.n_cols });
            }
        }
        if cols.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "row {}: column indices must be strictly increasing",
                self.n_rows
            )));
        }
        self.col_idx
            .write_all(bytemuck::cast_slice(cols))
            .map_err(|e| Error::io(self.dir.join(COLIDX_FILE), e))?;
        self.values
            .write_all(bytemuck::cast_slice(vals))
            .map_err(|e| Error::io(self.dir.join(VALUES_FILE), e))?;
        self.nnz += cols.len() as u64;
        self.n_rows += 1;
        self.write_row_ptr(self.nnz)
    }

    pub fn add_metadata(&mut self, column: MetadataColumn) -> Result<()> {
        if self.metadata.iter().any(|c| c.name == column.name) {
            return Err(Error::Validation(format!("duplicate metadata column `{}`", column.name)));
        }
        self.metadata.push(column);
        Ok(())
    }

    pub fn finish(mut self) -> Result<StoreHeader> {
        for col in &self.metadata {
            if col.data.len() as u64 != self.n_rows {
                return Err(Error::Dimension(format!(
                    "metadata column `{}` has {} rows, matrix has {}",
                    col.name,
                    col.data.len(),
                    self.n_rows
                )));
            }
        }
        for (w, name) in [
            (&mut self.row_ptr, ROWPTR_FILE),
            (&mut self.col_idx, COLIDX_FILE),
            (&mut self.values, VALUES_FILE),
        ] {
            w.flush().map_err(|e| Error::io(self.dir.join(name), e))?;
        }

        let mut specs = Vec::with_capacity(self.metadata.len());
        if !self.metadata.is_empty() {
            let meta_dir = self.dir.join(META_DIR);
            fs::create_dir_all(&meta_dir).map_err(|e| Error::io(&meta_dir, e))?;
            for col in &self.metadata {
                col.write_to(&meta_dir.join(format!("{}.bin", col.name)))?;
                specs.push(ColumnSpec { name: col.name.clone(), dtype: col.data.dtype() });
            }
        }

        let header = StoreHeader::new(self.n_rows, self.n_cols, self.nnz, specs);
        header.write(&self.dir)?;
        Ok(header)
    }

    fn write_row_ptr(&mut self, v: u64) -> Result<()> {
        self.row_ptr
            .write_all(&v.to_le_bytes())
            .map_err(|e| Error::io(self.dir.join(ROWPTR_FILE), e))
    }
}

pub(crate) fn prepare_out_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Error::Validation(format!("{} exists and is not a directory", dir.display())));
        }
        let non_empty = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .next()
            .is_some();
        if non_empty {
            if !overwrite {
                return Err(Error::OutputExists(dir.to_path_buf()));
            }
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
