//! Little-endian binary container shared by checkpoints, mutant delta files
//! and detector files.
//!
//! Every file starts with an 8-byte magic tag and a `u32` format version.
//! Strings are a `u32` byte length followed by UTF-8. Tensors are a `u32`
//! rank, `rank` × `u32` extents, then the row-major `f64` values.

use std::path::Path;

use crate::tensor::Tensor;
use crate::{Error, Result};

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8; 8], version: u32) -> Self {
        let mut w = Self { buf: Vec::new() };
        w.buf.extend_from_slice(magic);
        w.u32(version);
        w
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn usize(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("count fits in u32"));
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        self.usize(vs.len());
        for &v in vs {
            self.f64(v);
        }
    }

    pub fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn tensor(&mut self, t: &Tensor) {
        self.usize(t.rank());
        for &d in t.shape() {
            self.usize(d);
        }
        for &v in t.data() {
            self.f64(v);
        }
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    /// Validates the magic tag and version, leaving the cursor after the header.
    pub fn new(bytes: &'a [u8], magic: &[u8; 8], version: u32, what: &'static str) -> Result<Self> {
        let mut r = Self {
            bytes,
            pos: 0,
            what,
        };
        let tag = r.take(8)?;
        if tag != magic {
            return Err(r.error_at(
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(tag),
                    String::from_utf8_lossy(magic)
                ),
            ));
        }
        let found = r.u32()?;
        if found != version {
            return Err(Error::VersionMismatch {
                what,
                found,
                expected: version,
            });
        }
        Ok(r)
    }

    fn error_at(&self, offset: usize, reason: String) -> Error {
        Error::Format {
            what: self.what,
            offset: offset as u64,
            reason,
        }
    }

    pub fn invalid(&self, reason: impl Into<String>) -> Error {
        self.error_at(self.pos, reason.into())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let remain = self.bytes.len() - self.pos;
        if n > remain {
            return Err(self.error_at(
                self.pos,
                format!("truncated: need {n} bytes, {remain} remain"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        self.ensure(n, 8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn str(&mut self) -> Result<String> {
        let start = self.pos;
        let n = self.usize()?;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| self.error_at(start, "string is not UTF-8".into()))
    }

    pub fn tensor(&mut self) -> Result<Tensor> {
        let start = self.pos;
        let rank = self.usize()?;
        self.ensure(rank, 4)?;
        let shape: Vec<usize> = (0..rank).map(|_| self.usize()).collect::<Result<_>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .unwrap_or(usize::MAX);
        self.ensure(n, 8)?;
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Tensor::new(shape, data).map_err(|e| self.error_at(start, e.to_string()))
    }

    /// Fails early when `count` items of `size` bytes cannot fit in the remainder.
    fn ensure(&self, count: usize, size: usize) -> Result<()> {
        let remain = self.bytes.len() - self.pos;
        match count.checked_mul(size) {
            Some(need) if need <= remain => Ok(()),
            _ => Err(self.error_at(
                self.pos,
                format!("truncated: {count} items of {size} bytes declared, {remain} bytes remain"),
            )),
        }
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.error_at(
                self.pos,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}
