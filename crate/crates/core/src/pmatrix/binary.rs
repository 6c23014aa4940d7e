//! Binary matrix files.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! "PVM1"
//! u64 m, u32 k
//! k x (u16 byte length, UTF-8 item id)
//! u32 byte length, provenance JSON
//! m*k f64 values, row-major
//! SHA-256 of every preceding byte
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{check_value, MatrixError, PValueMatrix, Provenance};

pub const MAGIC: &[u8; 4] = b"PVM1";

/// Streams rows to `<path>.partial` and renames on `finish`, so an
/// interrupted run never leaves a file that parses as a complete matrix.
pub struct MatrixWriter {
    out: BufWriter<File>,
    hasher: Sha256,
    tmp: PathBuf,
    dest: PathBuf,
    k: usize,
    expected_rows: usize,
    rows: usize,
}

impl MatrixWriter {
    pub fn create(
        path: &Path,
        item_ids: &[String],
        provenance: &Provenance,
        m: usize,
    ) -> Result<Self, MatrixError> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".partial");
        let tmp = PathBuf::from(tmp);
        let out = BufWriter::with_capacity(1 << 20, File::create(&tmp)?);
        let mut w = Self {
            out,
            hasher: Sha256::new(),
            tmp,
            dest: path.to_path_buf(),
            k: item_ids.len(),
            expected_rows: m,
            rows: 0,
        };
        let mut header = Vec::new();
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&(m as u64).to_le_bytes());
        header.extend_from_slice(&(item_ids.len() as u32).to_le_bytes());
        for id in item_ids {
            let len = u16::try_from(id.len())
                .map_err(|_| MatrixError::format("header", format!("item id too long: {id:?}")))?;
            header.extend_from_slice(&len.to_le_bytes());
            header.extend_from_slice(id.as_bytes());
        }
        let json = serde_json::to_vec(provenance).map_err(|e| MatrixError::format("header", e))?;
        header.extend_from_slice(&(json.len() as u32).to_le_bytes());
        header.extend_from_slice(&json);
        w.write(&header)?;
        Ok(w)
    }

    fn write(&mut self, bytes: &[u8]) -> Result<(), MatrixError> {
        self.hasher.update(bytes);
        self.out.write_all(bytes)?;
        Ok(())
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<(), MatrixError> {
        if row.len() != self.k {
            return Err(MatrixError::RaggedRow { row: self.rows, found: row.len(), expected: self.k });
        }
        if self.rows == self.expected_rows {
            return Err(MatrixError::format(format!("row {}", self.rows), "more rows than declared"));
        }
        let mut buf = Vec::with_capacity(8 * row.len());
        for (i, &v) in row.iter().enumerate() {
            check_value(self.rows, i, v)?;
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.write(&buf)?;
        self.rows += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), MatrixError> {
        if self.rows != self.expected_rows {
            return Err(MatrixError::format(
                format!("row {}", self.rows),
                format!("declared {} rows", self.expected_rows),
            ));
        }
        let digest = self.hasher.finalize_reset();
        self.out.write_all(&digest)?;
        self.out.flush()?;
        self.out.get_ref().sync_all()?;
        fs::rename(&self.tmp, &self.dest)?;
        Ok(())
    }
}

impl Drop for MatrixWriter {
    fn drop(&mut self) {
        // no-op after a successful rename
        let _ = fs::remove_file(&self.tmp);
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], MatrixError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or_else(|| {
            MatrixError::format(format!("offset {}", self.pos), format!("truncated while reading {what}"))
        })?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16, MatrixError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, MatrixError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, MatrixError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn read_binary(path: &Path) -> Result<PValueMatrix, MatrixError> {
    let data = fs::read(path)?;
    parse(&data)
}

pub(crate) fn parse(data: &[u8]) -> Result<PValueMatrix, MatrixError> {
    let mut c = Cursor { data, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(MatrixError::format("offset 0", "bad magic"));
    }
    let m = c.u64("row count")? as usize;
    let k = c.u32("item count")? as usize;
    let mut ids = Vec::with_capacity(k.min((data.len() - c.pos) / 2));
    for _ in 0..k {
        let len = c.u16("item id length")? as usize;
        let at = c.pos;
        let raw = c.take(len, "item id")?;
        let id = std::str::from_utf8(raw)
            .map_err(|_| MatrixError::format(format!("offset {at}"), "item id is not UTF-8"))?;
        ids.push(id.to_string());
    }
    let hlen = c.u32("header length")? as usize;
    let at = c.pos;
    let provenance: Provenance = serde_json::from_slice(c.take(hlen, "provenance header")?)
        .map_err(|e| MatrixError::format(format!("offset {at}"), e))?;
    let body_len = m
        .checked_mul(k)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| MatrixError::format("header", "row count overflows"))?;
    let body_at = c.pos;
    let body = c.take(body_len, "values")?;
    let end = c.pos;
    let digest = c.take(32, "checksum")?;
    if c.pos != data.len() {
        return Err(MatrixError::format(format!("offset {}", c.pos), "trailing bytes"));
    }
    if Sha256::digest(&data[..end]).as_slice() != digest {
        return Err(MatrixError::ChecksumMismatch);
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    debug_assert_eq!(body_at + values.len() * 8, end);
    PValueMatrix::new(ids, values, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmatrix::{load_matrix, save_matrix};

    fn sample() -> PValueMatrix {
        let ids = vec!["x".to_string(), "y".to_string(), "z".to_string()];
        let rows = vec![vec![0.0, 0.5, 1.0], vec![0.25, 1.0 / 3.0, 0.999_999_999_999_9]];
        PValueMatrix::from_rows(ids, &rows, Provenance::synthetic("unit")).unwrap()
    }

    #[test]
    fn absurd_counts_are_format_errors() {
        let mut data = MAGIC.to_vec();
        data.extend(u64::MAX.to_le_bytes());
        data.extend(u32::MAX.to_le_bytes());
        data.extend(b"junk");
        assert!(matches!(parse(&data), Err(MatrixError::Format { .. })));
        assert!(matches!(parse(b"PVM1 definitely not a matrix"), Err(MatrixError::Format { .. })));
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pvm");
        save_matrix(&sample(), &p).unwrap();
        assert_eq!(load_matrix(&p).unwrap(), sample());
        assert!(!dir.path().join("m.pvm.partial").exists());
    }

    #[test]
    fn truncation_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pvm");
        save_matrix(&sample(), &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        for cut in [3, 10, 20, bytes.len() - 40, bytes.len() - 1] {
            assert!(matches!(parse(&bytes[..cut]), Err(MatrixError::Format { .. })), "cut {cut}");
        }
        let mut flipped = bytes.clone();
        let n = flipped.len();
        flipped[n - 40] ^= 1;
        assert!(matches!(parse(&flipped), Err(MatrixError::ChecksumMismatch)));
    }

    #[test]
    fn writer_enforces_row_count() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pvm");
        let ids = vec!["a".to_string()];
        let mut w = MatrixWriter::create(&p, &ids, &Provenance::synthetic("t"), 2).unwrap();
        w.push_row(&[0.5]).unwrap();
        assert!(w.finish().is_err());
        assert!(!p.exists());
        assert!(!dir.path().join("m.pvm.partial").exists());
    }
}
