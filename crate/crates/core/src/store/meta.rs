//! Per-row metadata columns.
//!
//! On disk each column is `meta/<name>.bin`: `float` columns are packed
//! little-endian f64, `int` columns packed little-endian i64, and `string`
//! columns a sequence of `u32` little-endian byte lengths each followed by
//! that many bytes of UTF-8.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::mapped::Mapped;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaDType {
    String,
    Float,
    Int,
}

/// A single metadata cell, borrowed from the mapped column for strings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetaValue<'a> {
    Str(&'a str),
    Float(f64),
    Int(i64),
}

impl fmt::Display for MetaValue<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetaValue::Str(s) => f.write_str(s),
            MetaValue::Float(v) => write!(f, "{v}"),
            MetaValue::Int(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Str(Vec<String>),
    Float(Vec<f64>),
    Int(Vec<i64>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Str(v) => v.len(),
            ColumnData::Float(v) => v.len(),
            ColumnData::Int(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> MetaDType {
        match self {
            ColumnData::Str(_) => MetaDType::String,
            ColumnData::Float(_) => MetaDType::Float,
            ColumnData::Int(_) => MetaDType::Int,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetadataColumn {
    pub name: String,
    pub data: ColumnData,
}

impl MetadataColumn {
    pub fn new(name: impl Into<String>, data: ColumnData) -> Result<Self> {
        let name = name.into();
        validate_column_name(&name)?;
        Ok(Self { name, data })
    }

    pub(crate) fn write_to(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let res = match &self.data {
            ColumnData::Float(v) => out.write_all(bytemuck::cast_slice(v)),
            ColumnData::Int(v) => out.write_all(bytemuck::cast_slice(v)),
            ColumnData::Str(v) => v.iter().try_for_each(|s| {
                let len = u32::try_from(s.len()).map_err(|_| {
                    std::io::Error::new(std::io::ErrorKind::InvalidInput, "string longer than 4 GiB")
                })?;
                out.write_all(&len.to_le_bytes())?;
                out.write_all(s.as_bytes())
            }),
        };
        res.and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
    }
}

/// Column names become file names, so keep them to a conservative alphabet.
pub fn validate_column_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && !name.starts_with('.')
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "metadata column name `{name}` must be non-empty ASCII [A-Za-z0-9_.-] not starting with `.`"
        )))
    }
}

/// Reads a tab-separated table with a header row. Each column becomes `int`
/// if every cell parses as i64, otherwise `float` if every cell parses as a
/// float, otherwise `string`.
pub fn read_tsv(path: &Path) -> Result<Vec<MetadataColumn>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::Parse { line: 1, msg: "metadata table has no header row".into() }),
    };
    let names: Vec<String> = header.trim_end_matches('\r').split('\t').map(str::to_owned).collect();
    for name in &names {
        validate_column_name(name)?;
    }
    for (i, name) in names.iter().enumerate() {
        if names[..i].contains(name) {
            return Err(Error::Parse { line: 1, msg: format!("duplicate column `{name}`") });
        }
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != names.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} fields, found {}", names.len(), fields.len()),
            });
        }
        for (col, field) in cells.iter_mut().zip(fields) {
            col.push(field.to_owned());
        }
    }

    Ok(names
        .into_iter()
        .zip(cells)
        .map(|(name, raw)| MetadataColumn { name, data: infer_column(raw) })
        .collect())
}

fn infer_column(raw: Vec<String>) -> ColumnData {
    if let Ok(ints) = raw.iter().map(|s| s.trim().parse::<i64>()).collect::<Result<Vec<_>, _>>() {
        return ColumnData::Int(ints);
    }
    if let Ok(floats) = raw.iter().map(|s| s.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>() {
        return ColumnData::Float(floats);
    }
    ColumnData::Str(raw)
}

/// A metadata column opened from disk.
#[derive(Debug)]
pub(crate) struct MappedColumn {
    pub dtype: MetaDType,
    map: Mapped,
    /// Byte offsets of each string record, built on first access.
    offsets: OnceLock<std::result::Result<Vec<usize>, String>>,
}

impl MappedColumn {
    pub fn open(path: &Path, dtype: MetaDType, n_rows: u64) -> Result<Self> {
        let map = Mapped::open(path)?;
        let len = map.len() as u64;
        match dtype {
            MetaDType::Float | MetaDType::Int => {
                if len != n_rows * 8 {
                    return Err(Error::Corruption(format!(
                        "{}: expected {} bytes for {n_rows} rows, found {len}",
                        path.display(),
                        n_rows * 8
                    )));
                }
            }
            MetaDType::String => {
                if len < n_rows * 4 {
                    return Err(Error::Corruption(format!(
                        "{}: {len} bytes cannot hold {n_rows} length-prefixed strings",
                        path.display()
                    )));
                }
            }
        }
        Ok(Self { dtype, map, offsets: OnceLock::new() })
    }

    pub fn get(&self, r: usize) -> Result<MetaValue<'_>> {
        let bytes = self.map.bytes();
        match self.dtype {
            MetaDType::Float => {
                let chunk = &bytes[r * 8..r * 8 + 8];
                Ok(MetaValue::Float(f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"))))
            }
            MetaDType::Int => {
                let chunk = &bytes[r * 8..r * 8 + 8];
                Ok(MetaValue::Int(i64::from_le_bytes(chunk.try_into().expect("8-byte chunk"))))
            }
            MetaDType::String => {
                let offsets = self
                    .offsets
                    .get_or_init(|| index_strings(bytes))
                    .as_ref()
                    .map_err(|msg| Error::Corruption(msg.clone()))?;
                if r + 1 >= offsets.len() {
                    return Err(Error::Corruption(format!(
                        "string column holds {} records, row {r} requested",
                        offsets.len() - 1
                    )));
                }
                let start = offsets[r];
                let end = offsets[r + 1];
                let s = std::str::from_utf8(&bytes[start + 4..end])
                    .map_err(|e| Error::Corruption(format!("metadata string row {r}: {e}")))?;
                Ok(MetaValue::Str(s))
            }
        }
    }

    /// Number of records, which for strings requires a scan.
    pub fn count(&self) -> Result<usize> {
        match self.dtype {
            MetaDType::Float | MetaDType::Int => Ok(self.map.len() / 8),
            MetaDType::String => self
                .offsets
                .get_or_init(|| index_strings(self.map.bytes()))
                .as_ref()
                .map(|o| o.len() - 1)
                .map_err(|msg| Error::Corruption(msg.clone())),
        }
    }
}

fn index_strings(bytes: &[u8]) -> std::result::Result<Vec<usize>, String> {
    let mut offsets = vec![0usize];
    let mut pos = 0usize;
    while pos < bytes.len() {
        let Some(prefix) = bytes.get(pos..pos + 4) else {
            return Err(format!("truncated string length prefix at byte {pos}"));
        };
        let len = u32::from_le_bytes(prefix.try_into().expect("4-byte prefix")) as usize;
        let end = pos + 4 + len;
        if end > bytes.len() {
            return Err(format!("string at byte {pos} runs past end of column"));
        }
        pos = end;
        offsets.push(pos);
    }
    Ok(offsets)
}
