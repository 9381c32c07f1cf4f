use std::collections::HashSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ustar::{TarEntry, TarReader};
use super::{Sample, ShardSet};
use crate::{Error, Result};

/// Streams samples of `set` in shard order. With `shuffle_buffer == 0` the
/// order is the write order; otherwise up to `shuffle_buffer` samples are held
/// and each arrival releases one uniformly chosen buffered sample, so at most
/// `shuffle_buffer + 1` samples are ever resident. The stream ends after the
/// first error.
pub fn stream_samples(set: &ShardSet, shuffle_buffer: usize, seed: u64) -> SampleStream {
    SampleStream {
        shards: set
            .shard_paths()
            .into_iter()
            .zip(set.samples_per_shard())
            .collect::<Vec<_>>()
            .into_iter(),
        current: None,
        buffer: Vec::with_capacity(shuffle_buffer.saturating_add(1).min(1 << 16)),
        capacity: shuffle_buffer,
        rng: ChaCha8Rng::seed_from_u64(seed),
        peak: 0,
        exhausted: false,
        failed: false,
    }
}

struct ShardCursor {
    path: PathBuf,
    expected: u64,
    reader: TarReader<BufReader<File>>,
    pending: Option<TarEntry>,
    keys: HashSet<String>,
    read: u64,
}

pub struct SampleStream {
    shards: std::vec::IntoIter<(PathBuf, u64)>,
    current: Option<ShardCursor>,
    buffer: Vec<Sample>,
    capacity: usize,
    rng: ChaCha8Rng,
    peak: usize,
    exhausted: bool,
    failed: bool,
}

fn split_name(path: &Path, name: &str) -> Result<(String, String)> {
    let format = |msg: String| Error::Format { path: path.to_path_buf(), msg };
    if name.contains('/') {
        return Err(format(format!("entry `{name}` is inside a directory")));
    }
    match name.split_once('.') {
        Some((key, ext)) if !key.is_empty() && !ext.is_empty() => Ok((key.to_owned(), ext.to_owned())),
        _ => Err(format(format!("entry `{name}` is not named <key>.<ext>"))),
    }
}

impl ShardCursor {
    fn open(path: PathBuf, expected: u64) -> Result<Self> {
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            expected,
            reader: TarReader::new(BufReader::new(file)),
            pending: None,
            keys: HashSet::new(),
            read: 0,
        })
    }

    fn next_entry(&mut self) -> Result<Option<TarEntry>> {
        if let Some(e) = self.pending.take() {
            return Ok(Some(e));
        }
        self.reader.next_entry().map_err(|e| Error::Format { path: self.path.clone(), msg: e.to_string() })
    }

    fn next_sample(&mut self) -> Result<Option<Sample>> {
        let Some(first) = self.next_entry()? else {
            if self.read != self.expected {
                return Err(Error::Corruption(format!(
                    "{} holds {} samples, manifest says {}",
                    self.path.display(),
                    self.read,
                    self.expected
                )));
            }
            return Ok(None);
        };
        let (key, ext) = split_name(&self.path, &first.name)?;
        if !self.keys.insert(key.clone()) {
            return Err(Error::Format {
                path: self.path.clone(),
                msg: format!("entries of key `{key}` are not contiguous"),
            });
        }
        let mut sample = Sample { key, parts: Default::default() };
        sample.parts.insert(ext, first.data);
        while let Some(entry) = self.next_entry()? {
            let (key, ext) = split_name(&self.path, &entry.name)?;
            if key != sample.key {
                self.pending = Some(entry);
                break;
            }
            if sample.parts.insert(ext, entry.data).is_some() {
                return Err(Error::Format {
                    path: self.path.clone(),
                    msg: format!("duplicate entry `{}`", entry.name),
                });
            }
        }
        self.read += 1;
        Ok(Some(sample))
    }
}

impl SampleStream {
    /// Largest number of samples held in the shuffle buffer at once.
    pub fn peak_buffered(&self) -> usize {
        self.peak
    }

    fn pull(&mut self) -> Result<Option<Sample>> {
        loop {
            if self.current.is_none() {
                match self.shards.next() {
                    Some((path, expected)) => self.current = Some(ShardCursor::open(path, expected)?),
                    None => return Ok(None),
                }
            }
            let cursor = self.current.as_mut().expect("cursor set above");
            match cursor.next_sample()? {
                Some(s) => return Ok(Some(s)),
                None => self.current = None,
            }
        }
    }

    fn release(&mut self) -> Option<Sample> {
        if self.buffer.is_empty() {
            return None;
        }
        let i = self.rng.random_range(0..self.buffer.len());
        Some(self.buffer.swap_remove(i))
    }
}

impl Iterator for SampleStream {
    type Item = Result<Sample>;

    fn next(&mut self) -> Option<Result<Sample>> {
        if self.failed {
            return None;
        }
        while !self.exhausted {
            match self.pull() {
                Ok(Some(sample)) => {
                    if self.capacity == 0 {
                        self.peak = self.peak.max(1);
                        return Some(Ok(sample));
                    }
                    self.buffer.push(sample);
                    self.peak = self.peak.max(self.buffer.len());
                    if self.buffer.len() > self.capacity {
                        return self.release().map(Ok);
                    }
                }
                Ok(None) => self.exhausted = true,
                Err(e) => {
                    self.failed = true;
                    self.buffer.clear();
                    return Some(Err(e));
                }
            }
        }
        self.release().map(Ok)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shard::write_shards;

    fn write(dir: &std::path::Path, n: usize, per: u64) -> ShardSet {
        let samples = (0..n).map(|i| {
            Sample::new(format!("k{i:04}"))
                .unwrap()
                .with_part("bin", vec![i as u8; i % 7])
                .unwrap()
                .with_part("cls", i.to_string().into_bytes())
                .unwrap()
        });
        write_shards(samples, dir, per, false).unwrap()
    }

    fn keys(stream: SampleStream) -> Vec<String> {
        stream.map(|s| s.unwrap().key).collect()
    }

    #[test]
    fn zero_buffer_is_write_order() {
        let dir = tempfile::tempdir().unwrap();
        let set = write(dir.path(), 23, 5);
        let got = keys(stream_samples(&set, 0, 1));
        let want: Vec<String> = (0..23).map(|i| format!("k{i:04}")).collect();
        assert_eq!(got, want);
        let s = stream_samples(&set, 0, 1).next().unwrap().unwrap();
        assert_eq!(s.part("cls"), Some(&b"0"[..]));
        assert_eq!(s.part("bin"), Some(&[][..]));
    }

    #[test]
    fn shuffled_exactly_once_and_bounded() {
        let dir = tempfile::tempdir().unwrap();
        let set = write(dir.path(), 100, 9);
        let mut stream = stream_samples(&set, 4, 7);
        let mut got: Vec<String> = stream.by_ref().map(|s| s.unwrap().key).collect();
        assert!(stream.peak_buffered() <= 5);
        let shuffled = got.clone();
        got.sort();
        let want: Vec<String> = (0..100).map(|i| format!("k{i:04}")).collect();
        assert_eq!(got, want);
        assert_ne!(shuffled, want);
        assert_eq!(keys(stream_samples(&set, 4, 7)), shuffled);
        assert_ne!(keys(stream_samples(&set, 4, 8)), shuffled);
    }

    #[test]
    fn split_partitions_shards() {
        let dir = tempfile::tempdir().unwrap();
        let set = write(dir.path(), 40, 3);
        let mut all: Vec<String> = (0..3).flat_map(|w| keys(set.split(w, 3).unwrap().stream(2, w as u64))).collect();
        all.sort();
        assert_eq!(all.len(), 40);
        all.dedup();
        assert_eq!(all.len(), 40);
        assert!(set.split(3, 3).is_err());
    }

    fn raw_tar(names: &[&str]) -> Vec<u8> {
        let mut b = tar::Builder::new(Vec::new());
        for name in names {
            let mut h = tar::Header::new_ustar();
            h.set_size(1);
            h.set_mode(0o644);
            b.append_data(&mut h, name, &b"x"[..]).unwrap();
        }
        b.into_inner().unwrap()
    }

    fn set_with(dir: &std::path::Path, names: &[&str], count: u64) -> ShardSet {
        std::fs::write(dir.join("shard-000000.tar"), raw_tar(names)).unwrap();
        std::fs::write(
            dir.join("manifest.json"),
            format!(r#"{{"version":1,"total_samples":{count},"shards":[{{"path":"shard-000000.tar","count":{count}}}]}}"#),
        )
        .unwrap();
        ShardSet::open(dir).unwrap()
    }

    #[test]
    fn interleaved_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let set = set_with(dir.path(), &["a.bin", "b.bin", "a.json"], 2);
        let res: Vec<_> = stream_samples(&set, 0, 0).collect();
        assert!(matches!(res.last(), Some(Err(Error::Format { .. }))), "{res:?}");
    }

    #[test]
    fn bad_names_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let set = set_with(dir.path(), &["noext"], 1);
        assert!(matches!(stream_samples(&set, 0, 0).next(), Some(Err(Error::Format { .. }))));
        let set = set_with(dir.path(), &["a.bin", "b.bin"], 3);
        let res: Vec<_> = stream_samples(&set, 2, 0).collect();
        assert_eq!(res.len(), 1);
        assert!(matches!(res[0], Err(Error::Corruption(_))));
    }

    #[test]
    fn missing_shard_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let set = write(dir.path(), 4, 2);
        std::fs::remove_file(dir.path().join("shard-000001.tar")).unwrap();
        let res: Vec<_> = stream_samples(&set, 0, 0).collect();
        assert_eq!(res.len(), 3);
        assert!(matches!(res[2], Err(Error::Io { .. })));
    }
}
