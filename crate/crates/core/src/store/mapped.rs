use std::fs::File;
use std::path::Path;

use memmap2::{Mmap, MmapOptions};

use crate::{Error, Result};

/// Read-only file mapping. Zero-length files are represented without a
/// mapping since some platforms refuse to map them.
#[derive(Debug)]
pub(crate) enum Mapped {
    Empty,
    Map(Mmap),
}

impl Mapped {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        if len == 0 {
            return Ok(Mapped::Empty);
        }
        // SAFETY: stores are immutable after build; the mapping is read-only
        // and callers are told not to modify store files while open.
        let map = unsafe { MmapOptions::new().map(&file) }.map_err(|e| Error::io(path, e))?;
        Ok(Mapped::Map(map))
    }

    pub fn bytes(&self) -> &[u8] {
        match self {
            Mapped::Empty => &[],
            Mapped::Map(m) => m,
        }
    }

    pub fn len(&self) -> usize {
        self.bytes().len()
    }

    /// Reinterprets the mapping as a slice of `T`. Mappings are page-aligned,
    /// so this only fails on a length that is not a multiple of `T`.
    pub fn cast<T: bytemuck::Pod>(&self, what: &str) -> Result<&[T]> {
        let bytes = match self {
            // an empty byte literal carries no alignment guarantee
            Mapped::Empty => return Ok(&[]),
            Mapped::Map(m) => &m[..],
        };
        bytemuck::try_cast_slice(bytes)
            .map_err(|e| Error::Corruption(format!("{what}: cannot view as packed array: {e:?}")))
    }
}
