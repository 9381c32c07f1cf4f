//! Minimal streaming reader for uncompressed tar archives.
//!
//! Yields regular-file entries one at a time without buffering the archive;
//! pax and GNU long-name records are honoured, directories are rejected.

use std::io::{self, Read};

const BLOCK: usize = 512;

#[derive(Debug)]
pub(crate) struct TarEntry {
    pub name: String,
    pub data: Vec<u8>,
}

pub(crate) struct TarReader<R> {
    inner: R,
    done: bool,
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn parse_octal(field: &[u8]) -> io::Result<u64> {
    // base-256 encoding for large values
    if field.first().is_some_and(|b| b & 0x80 != 0) {
        let mut v: u64 = u64::from(field[0] & 0x7f);
        for &b in &field[1..] {
            v = v.checked_mul(256).ok_or_else(|| invalid("numeric field overflows"))? + u64::from(b);
        }
        return Ok(v);
    }
    let text: String = field
        .iter()
        .take_while(|&&b| b != 0)
        .map(|&b| b as char)
        .collect();
    let text = text.trim();
    if text.is_empty() {
        return Ok(0);
    }
    u64::from_str_radix(text, 8).map_err(|_| invalid(format!("bad octal field `{text}`")))
}

fn c_string(field: &[u8]) -> io::Result<String> {
    let end = field.iter().position(|&b| b == 0).unwrap_or(field.len());
    String::from_utf8(field[..end].to_vec()).map_err(|_| invalid("entry name is not UTF-8"))
}

impl<R: Read> TarReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, done: false }
    }

    fn read_block(&mut self, buf: &mut [u8; BLOCK]) -> io::Result<bool> {
        let mut filled = 0;
        while filled < BLOCK {
            match self.inner.read(&mut buf[filled..])? {
                0 if filled == 0 => return Ok(false),
                0 => return Err(invalid("truncated tar block")),
                n => filled += n,
            }
        }
        Ok(true)
    }

    fn read_body(&mut self, size: u64) -> io::Result<Vec<u8>> {
        let size = usize::try_from(size).map_err(|_| invalid("entry too large"))?;
        let mut data = vec![0u8; size];
        self.inner.read_exact(&mut data).map_err(|e| {
            if e.kind() == io::ErrorKind::UnexpectedEof {
                invalid("truncated entry body")
            } else {
                e
            }
        })?;
        let pad = (BLOCK - size % BLOCK) % BLOCK;
        if pad > 0 {
            let mut skip = [0u8; BLOCK];
            self.inner.read_exact(&mut skip[..pad]).map_err(|_| invalid("truncated entry padding"))?;
        }
        Ok(data)
    }

    pub fn next_entry(&mut self) -> io::Result<Option<TarEntry>> {
        let mut long_name: Option<String> = None;
        let mut header = [0u8; BLOCK];
        loop {
            if self.done || !self.read_block(&mut header)? {
                self.done = true;
                return Ok(None);
            }
            if header.iter().all(|&b| b == 0) {
                self.done = true;
                return Ok(None);
            }
            verify_checksum(&header)?;

            let size = parse_octal(&header[124..136])?;
            let typeflag = header[156];
            match typeflag {
                b'0' | 0 | b'7' => {
                    let name = match long_name.take() {
                        Some(n) => n,
                        None => {
                            let name = c_string(&header[0..100])?;
                            let is_ustar = &header[257..262] == b"ustar";
                            let prefix = if is_ustar { c_string(&header[345..500])? } else { String::new() };
                            if prefix.is_empty() {
                                name
                            } else {
                                format!("{prefix}/{name}")
                            }
                        }
                    };
                    let data = self.read_body(size)?;
                    return Ok(Some(TarEntry { name, data }));
                }
                b'L' => {
                    let body = self.read_body(size)?;
                    long_name = Some(c_string(&body)?);
                }
                b'x' => {
                    let body = self.read_body(size)?;
                    if let Some(path) = pax_path(&body) {
                        long_name = Some(path);
                    }
                }
                b'g' => {
                    self.read_body(size)?;
                }
                b'5' => return Err(invalid(format!("directory entry `{}` not allowed", c_string(&header[0..100])?))),
                other => return Err(invalid(format!("unsupported tar entry type {:?}", other as char))),
            }
        }
    }
}

fn verify_checksum(header: &[u8; BLOCK]) -> io::Result<()> {
    let stored = parse_octal(&header[148..156])?;
    let sum: u64 = header
        .iter()
        .enumerate()
        .map(|(i, &b)| if (148..156).contains(&i) { u64::from(b' ') } else { u64::from(b) })
        .sum();
    if sum != stored {
        return Err(invalid(format!("header checksum mismatch (stored {stored}, computed {sum})")));
    }
    Ok(())
}

fn pax_path(body: &[u8]) -> Option<String> {
    let text = std::str::from_utf8(body).ok()?;
    text.lines().find_map(|rec| {
        let (_, kv) = rec.split_once(' ')?;
        kv.strip_prefix("path=").map(str::to_owned)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn archive(entries: &[(&str, &[u8])]) -> Vec<u8> {
        let mut b = tar::Builder::new(Vec::new());
        for (name, data) in entries {
            let mut h = tar::Header::new_ustar();
            h.set_path(name).unwrap();
            h.set_size(data.len() as u64);
            h.set_mode(0o644);
            h.set_cksum();
            b.append(&h, *data).unwrap();
        }
        b.into_inner().unwrap()
    }

    #[test]
    fn reads_entries_written_by_tar_crate() {
        let bytes = archive(&[("a.bin", b"xy"), ("a.json", b"{}"), ("b.txt", &[7u8; 1000])]);
        let mut r = TarReader::new(&bytes[..]);
        let names: Vec<_> = std::iter::from_fn(|| r.next_entry().unwrap()).map(|e| (e.name, e.data.len())).collect();
        assert_eq!(names, vec![("a.bin".into(), 2), ("a.json".into(), 2), ("b.txt".into(), 1000)]);
    }

    #[test]
    fn gnu_long_names() {
        let long = format!("{}.bin", "k".repeat(150));
        let mut b = tar::Builder::new(Vec::new());
        let mut h = tar::Header::new_gnu();
        h.set_size(1);
        h.set_mode(0o644);
        b.append_data(&mut h, &long, &b"z"[..]).unwrap();
        let bytes = b.into_inner().unwrap();
        let e = TarReader::new(&bytes[..]).next_entry().unwrap().unwrap();
        assert_eq!(e.name, long);
    }

    #[test]
    fn corruption_detected() {
        let mut bytes = archive(&[("a.bin", b"xy")]);
        bytes[0] = b'b';
        assert!(TarReader::new(&bytes[..]).next_entry().is_err());
        let bytes = archive(&[("a.bin", &[1u8; 600])]);
        assert!(TarReader::new(&bytes[..700]).next_entry().is_err());
    }

    #[test]
    fn octal_fields() {
        assert_eq!(parse_octal(b"0000644\0").unwrap(), 0o644);
        assert_eq!(parse_octal(b"       \0").unwrap(), 0);
        assert_eq!(parse_octal(&[0x80, 0, 0, 1, 0]).unwrap(), 256);
    }
}
