use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::meta::MetaDType;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const VALUE_WIDTH: u32 = 32;
pub const INDEX_WIDTH: u32 = 64;

pub const HEADER_FILE: &str = "header.json";
pub const ROWPTR_FILE: &str = "rowptr.bin";
pub const COLIDX_FILE: &str = "colidx.bin";
pub const VALUES_FILE: &str = "values.bin";
pub const META_DIR: &str = "meta";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub dtype: MetaDType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub format_version: u32,
    pub n_rows: u64,
    pub n_cols: u64,
    pub nnz: u64,
    pub value_width: u32,
    pub index_width: u32,
    #[serde(default)]
    pub metadata: Vec<ColumnSpec>,
}

impl StoreHeader {
    pub fn new(n_rows: u64, n_cols: u64, nnz: u64, metadata: Vec<ColumnSpec>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            n_rows,
            n_cols,
            nnz,
            value_width: VALUE_WIDTH,
            index_width: INDEX_WIDTH,
            metadata,
        }
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(HEADER_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let header: StoreHeader = serde_json::from_str(&text)
            .map_err(|e| Error::Corruption(format!("{}: {e}", path.display())))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: header.format_version,
                supported: FORMAT_VERSION,
            });
        }
        if header.value_width != VALUE_WIDTH || header.index_width != INDEX_WIDTH {
            return Err(Error::Corruption(format!(
                "unsupported widths value={} index={} (expected {VALUE_WIDTH}/{INDEX_WIDTH})",
                header.value_width, header.index_width
            )));
        }
        Ok(header)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(HEADER_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(&path, e))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}
