use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{shard_file_name, validate_ext, validate_key, Manifest, Sample, ShardEntry, ShardSet};
use super::{MANIFEST_FILE, MANIFEST_VERSION};
use crate::store::prepare_out_dir;
use crate::{Error, Result};

const MAX_ENTRY_NAME: usize = 100;

/// Writes samples in order, starting a new shard after every
/// `max_per_shard` samples. The manifest is written last, so a failed write
/// leaves a directory that does not open as a shard set.
pub fn write_shards<I>(samples: I, out_dir: impl AsRef<Path>, max_per_shard: u64, overwrite: bool) -> Result<ShardSet>
where
    I: IntoIterator<Item = Sample>,
{
    if max_per_shard == 0 {
        return Err(Error::Validation("max_per_shard must be at least 1".into()));
    }
    let out_dir = out_dir.as_ref();
    prepare_out_dir(out_dir, overwrite)?;

    let mut seen: HashSet<String> = HashSet::new();
    let mut shards: Vec<ShardEntry> = Vec::new();
    let mut open: Option<(PathBuf, tar::Builder<BufWriter<File>>)> = None;

    for sample in samples {
        validate_key(&sample.key)?;
        if sample.parts.is_empty() {
            return Err(Error::Validation(format!("sample `{}` has no parts", sample.key)));
        }
        if !seen.insert(sample.key.clone()) {
            return Err(Error::DuplicateKey(sample.key));
        }

        if shards.last().is_none_or(|s| s.count == max_per_shard) {
            if let Some((path, builder)) = open.take() {
                finish(&path, builder)?;
            }
            let name = shard_file_name(shards.len());
            let path = out_dir.join(&name);
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            open = Some((path, tar::Builder::new(BufWriter::new(file))));
            shards.push(ShardEntry { path: name, count: 0 });
        }
        let (path, builder) = open.as_mut().expect("shard opened above");
        for (ext, data) in &sample.parts {
            validate_ext(ext)?;
            let name = format!("{}.{ext}", sample.key);
            if name.len() > MAX_ENTRY_NAME {
                return Err(Error::Validation(format!(
                    "entry name `{name}` exceeds {MAX_ENTRY_NAME} bytes"
                )));
            }
            let mut header = tar::Header::new_ustar();
            header.set_size(data.len() as u64);
            header.set_mode(0o644);
            header.set_mtime(0);
            header.set_uid(0);
            header.set_gid(0);
            header.set_entry_type(tar::EntryType::Regular);
            builder
                .append_data(&mut header, &name, data.as_slice())
                .map_err(|e| Error::io(&*path, e))?;
        }
        shards.last_mut().expect("shard pushed above").count += 1;
    }
    if let Some((path, builder)) = open.take() {
        finish(&path, builder)?;
    }

    let manifest = Manifest {
        version: MANIFEST_VERSION,
        total_samples: shards.iter().map(|s| s.count).sum(),
        shards,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    ShardSet::open(out_dir)
}

fn finish(path: &Path, builder: tar::Builder<BufWriter<File>>) -> Result<()> {
    let mut inner = builder.into_inner().map_err(|e| Error::io(path, e))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(key: &str) -> Sample {
        Sample::new(key).unwrap().with_part("bin", key.as_bytes().to_vec()).unwrap()
    }

    #[test]
    fn ceiling_split() {
        let dir = tempfile::tempdir().unwrap();
        let set = write_shards((0..5).map(|i| sample(&format!("s{i}"))), dir.path(), 2, false).unwrap();
        assert_eq!(set.samples_per_shard(), vec![2, 2, 1]);
        assert_eq!(set.total_samples(), 5);
        assert!(dir.path().join("shard-000002.tar").exists());
    }

    #[test]
    fn parts_adjacent() {
        let dir = tempfile::tempdir().unwrap();
        let a = Sample::new("a")
            .unwrap()
            .with_part("bin", b"xy".to_vec())
            .unwrap()
            .with_part("json", b"{}".to_vec())
            .unwrap();
        write_shards([a, sample("b")], dir.path(), 10, false).unwrap();
        let bytes = std::fs::read(dir.path().join("shard-000000.tar")).unwrap();
        let mut r = crate::shard::ustar::TarReader::new(&bytes[..]);
        let names: Vec<_> = std::iter::from_fn(|| r.next_entry().unwrap()).map(|e| e.name).collect();
        assert_eq!(names, vec!["a.bin", "a.json", "b.bin"]);
    }

    #[test]
    fn rejects_bad_input() {
        let dir = tempfile::tempdir().unwrap();
        let err = write_shards([sample("a"), sample("a")], dir.path().join("x"), 1, false).unwrap_err();
        assert!(matches!(err, Error::DuplicateKey(k) if k == "a"));
        let err = write_shards([Sample::new("e").unwrap()], dir.path().join("y"), 1, false).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(write_shards([sample("a")], dir.path().join("z"), 0, false).is_err());
        let long = Sample::new("k".repeat(120)).unwrap().with_part("bin", vec![1]).unwrap();
        assert!(write_shards([long], dir.path().join("w"), 1, false).is_err());
        // a failed write leaves no manifest behind
        assert!(ShardSet::open(dir.path().join("x")).is_err());
    }

    #[test]
    fn empty_stream_and_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let set = write_shards(Vec::new(), dir.path(), 3, false).unwrap();
        assert!(set.is_empty());
        assert!(matches!(write_shards([sample("a")], dir.path(), 3, false), Err(Error::OutputExists(_))));
        let set = write_shards([sample("a")], dir.path(), 3, true).unwrap();
        assert_eq!(set.total_samples(), 1);
    }
}
