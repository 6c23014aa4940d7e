//! The m x k p-value matrix: one row per sequence, one column per test item.
//!
//! Rows are computed in parallel and handed to a single ordered sink, so a
//! matrix (and any file written from it) does not depend on the worker count.

mod binary;
mod text;

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitseq::BitSequence;
use crate::genrand::GeneratorSpec;
use crate::sts162::{item_ids, Battery, BatteryError, BatteryParams};

pub use binary::{read_binary, MatrixWriter, MAGIC};
pub use text::{import_csv, read_csv, write_csv};

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("format error at {at}: {detail}")]
    Format { at: String, detail: String },
    #[error("checksum mismatch: file is corrupt")]
    ChecksumMismatch,
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("item {0:?} appears more than once")]
    DuplicateItem(String),
    #[error("item {0:?} missing from input")]
    MissingItem(String),
    #[error("value {value} out of [0, 1] at row {row}, column {col}")]
    ValueOutOfRange { row: usize, col: usize, value: f64 },
    #[error("row {row} has {found} values, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("sequence {row} has length {actual}, expected {expected}")]
    LengthMismatch { row: usize, expected: usize, actual: usize },
    #[error("need at least {minimum} rows, got {actual}")]
    TooFewRows { minimum: usize, actual: usize },
    #[error("sequence {row}: {source}")]
    Battery {
        row: usize,
        #[source]
        source: BatteryError,
    },
    #[error("invalid worker count {0}")]
    Workers(usize),
}

impl MatrixError {
    pub(crate) fn format(at: impl fmt::Display, detail: impl fmt::Display) -> Self {
        MatrixError::Format { at: at.to_string(), detail: detail.to_string() }
    }

    /// True when the root cause is a numerical failure inside the battery.
    pub fn is_numerical(&self) -> bool {
        matches!(self, MatrixError::Battery { source, .. } if source.is_numerical())
    }
}

/// Where a matrix came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum MatrixSource {
    /// Consecutive sequences of one generator stream, starting at `first_index`.
    Generator { spec: GeneratorSpec, first_index: u64 },
    Files { names: Vec<String> },
    Import { path: String },
    Synthetic { description: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: MatrixSource,
    pub n: Option<usize>,
    pub params: Option<BatteryParams>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Provenance {
    pub fn synthetic(description: impl Into<String>) -> Self {
        Self {
            source: MatrixSource::Synthetic { description: description.into() },
            n: None,
            params: None,
            warnings: Vec::new(),
        }
    }

    pub fn battery(source: MatrixSource, params: &BatteryParams) -> Self {
        Self {
            source,
            n: Some(params.n),
            params: Some(params.clone()),
            warnings: params.warnings(),
        }
    }
}

/// Row-major p-values with their column ids and provenance.
///
/// Matrices computed by the battery always carry the 162 canonical items in
/// canonical order. Any other distinct id list is accepted so the analysis
/// code can run on synthetic columns.
#[derive(Clone, Debug, PartialEq)]
pub struct PValueMatrix {
    m: usize,
    item_ids: Vec<String>,
    values: Vec<f64>,
    provenance: Provenance,
}

fn check_ids(ids: &[String]) -> Result<(), MatrixError> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(MatrixError::DuplicateItem(id.clone()));
        }
    }
    Ok(())
}

pub(crate) fn check_value(row: usize, col: usize, value: f64) -> Result<(), MatrixError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(MatrixError::ValueOutOfRange { row, col, value })
    }
}

impl PValueMatrix {
    pub fn new(
        item_ids: Vec<String>,
        values: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self, MatrixError> {
        let k = item_ids.len();
        if k == 0 {
            return Err(MatrixError::format("header", "no items"));
        }
        check_ids(&item_ids)?;
        if values.len() % k != 0 {
            let m = values.len() / k;
            return Err(MatrixError::RaggedRow { row: m, found: values.len() % k, expected: k });
        }
        for (idx, &v) in values.iter().enumerate() {
            check_value(idx / k, idx % k, v)?;
        }
        Ok(Self { m: values.len() / k, item_ids, values, provenance })
    }

    /// Builds from per-row vectors (e.g. a synthetic experiment).
    pub fn from_rows(
        item_ids: Vec<String>,
        rows: &[Vec<f64>],
        provenance: Provenance,
    ) -> Result<Self, MatrixError> {
        let k = item_ids.len();
        let mut values = Vec::with_capacity(rows.len() * k);
        for (j, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(MatrixError::RaggedRow { row: j, found: r.len(), expected: k });
            }
            values.extend_from_slice(r);
        }
        Self::new(item_ids, values, provenance)
    }

    /// Number of rows (sequences).
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of columns (items).
    pub fn k(&self) -> usize {
        self.item_ids.len()
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_ids.iter().position(|i| i == id)
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let k = self.k();
        &self.values[j * k..(j + 1) * k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.k())
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.k() + i]
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows().map(|r| r[i]).collect()
    }

    /// True when the columns are exactly the canonical battery items.
    pub fn is_canonical(&self) -> bool {
        self.item_ids == item_ids()
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, MatrixError> {
    if workers == 0 {
        return Err(MatrixError::Workers(workers));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| MatrixError::Io(std::io::Error::other(e)))
}

/// Runs the battery over `seqs` with `workers` threads and hands each row,
/// in sequence order, to `sink`. Returns the number of rows produced.
pub fn compute_rows<I, F>(
    seqs: I,
    params: &BatteryParams,
    workers: usize,
    mut sink: F,
) -> Result<usize, MatrixError>
where
    I: IntoIterator<Item = BitSequence>,
    F: FnMut(usize, &[f64]) -> Result<(), MatrixError>,
{
    let battery = Battery::new(params.clone()).map_err(|e| MatrixError::Battery { row: 0, source: e })?;
    battery.check_minimums(None).map_err(|e| MatrixError::Battery { row: 0, source: e })?;
    let pool = pool(workers)?;
    let chunk_len = 16 * workers;
    let mut seqs = seqs.into_iter();
    let mut done = 0usize;
    loop {
        let chunk: Vec<BitSequence> = seqs.by_ref().take(chunk_len).collect();
        if chunk.is_empty() {
            return Ok(done);
        }
        for (offset, s) in chunk.iter().enumerate() {
            if s.len() != params.n {
                return Err(MatrixError::LengthMismatch {
                    row: done + offset,
                    expected: params.n,
                    actual: s.len(),
                });
            }
        }
        let rows: Vec<Result<Vec<f64>, BatteryError>> =
            pool.install(|| chunk.par_iter().map(|s| battery.run(s)).collect());
        for (offset, row) in rows.into_iter().enumerate() {
            let row = row.map_err(|e| MatrixError::Battery { row: done + offset, source: e })?;
            sink(done + offset, &row)?;
        }
        done += chunk.len();
    }
}

/// The full matrix for `seqs` (m >= 2), held in memory.
pub fn compute_matrix(
    seqs: &[BitSequence],
    params: &BatteryParams,
    workers: usize,
    source: MatrixSource,
) -> Result<PValueMatrix, MatrixError> {
    if seqs.len() < 2 {
        return Err(MatrixError::TooFewRows { minimum: 2, actual: seqs.len() });
    }
    let mut values = Vec::with_capacity(seqs.len() * crate::sts162::ITEM_COUNT);
    compute_rows(seqs.iter().cloned(), params, workers, |_, row| {
        values.extend_from_slice(row);
        Ok(())
    })?;
    PValueMatrix::new(item_ids(), values, Provenance::battery(source, params))
}

/// `m` rows from consecutive `params.n`-bit blocks of a generator stream.
pub fn compute_generated(
    spec: &GeneratorSpec,
    m: usize,
    params: &BatteryParams,
    workers: usize,
) -> Result<PValueMatrix, MatrixError> {
    if m < 2 {
        return Err(MatrixError::TooFewRows { minimum: 2, actual: m });
    }
    let mut values = Vec::with_capacity(m * crate::sts162::ITEM_COUNT);
    let seqs = spec.stream().sequences(params.n).take(m);
    compute_rows(seqs, params, workers, |_, row| {
        values.extend_from_slice(row);
        Ok(())
    })?;
    let source = MatrixSource::Generator { spec: spec.clone(), first_index: 0 };
    PValueMatrix::new(item_ids(), values, Provenance::battery(source, params))
}

/// Streams `m` generated rows straight into a binary matrix file.
pub fn compute_generated_to_file(
    spec: &GeneratorSpec,
    m: usize,
    params: &BatteryParams,
    workers: usize,
    path: &Path,
) -> Result<(), MatrixError> {
    if m < 2 {
        return Err(MatrixError::TooFewRows { minimum: 2, actual: m });
    }
    let source = MatrixSource::Generator { spec: spec.clone(), first_index: 0 };
    let mut writer = MatrixWriter::create(path, &item_ids(), &Provenance::battery(source, params), m)?;
    let seqs = spec.stream().sequences(params.n).take(m);
    compute_rows(seqs, params, workers, |_, row| writer.push_row(row))?;
    writer.finish()
}

/// Saves as binary, or as CSV when the extension is `.csv`.
pub fn save_matrix(mat: &PValueMatrix, path: &Path) -> Result<(), MatrixError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_csv(mat, path)
    } else {
        let mut w = MatrixWriter::create(path, mat.item_ids(), mat.provenance(), mat.m())?;
        for row in mat.rows() {
            w.push_row(row)?;
        }
        w.finish()
    }
}

/// Loads either format, recognized by the binary magic bytes.
pub fn load_matrix(path: &Path) -> Result<PValueMatrix, MatrixError> {
    let mut head = [0u8; 4];
    let is_binary = {
        use std::io::Read;
        let mut f = std::fs::File::open(path)?;
        let mut got = 0;
        while got < 4 {
            match f.read(&mut head[got..])? {
                0 => break,
                r => got += r,
            }
        }
        got == 4 && &head == MAGIC
    };
    if is_binary {
        read_binary(path)
    } else {
        read_csv(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genrand::make_sequence_set;

    #[test]
    fn small_matrix_shape_and_range() {
        let spec = GeneratorSpec::default();
        let params = BatteryParams::for_length(10_000);
        let mat = compute_generated(&spec, 2, &params, 1).unwrap();
        assert_eq!((mat.m(), mat.k()), (2, 162));
        assert!(mat.values().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(mat.is_canonical());
        assert!(!mat.provenance().warnings.is_empty());

        let seqs = make_sequence_set(&spec, 2, 10_000).unwrap();
        let again = compute_matrix(&seqs, &params, 3, MatrixSource::Generator { spec, first_index: 0 }).unwrap();
        assert_eq!(again, mat);
    }

    #[test]
    fn rejects_bad_inputs() {
        let params = BatteryParams::for_length(10_000);
        let spec = GeneratorSpec::default();
        assert!(matches!(compute_generated(&spec, 1, &params, 1), Err(MatrixError::TooFewRows { .. })));
        assert!(matches!(compute_generated(&spec, 2, &params, 0), Err(MatrixError::Workers(0))));
        let seqs = make_sequence_set(&spec, 2, 9_999).unwrap();
        let err = compute_matrix(&seqs, &params, 1, MatrixSource::Files { names: vec![] }).unwrap_err();
        assert!(matches!(err, MatrixError::LengthMismatch { row: 0, .. }));

        let ids = vec!["a".to_string(), "b".to_string()];
        let prov = Provenance::synthetic("t");
        assert!(matches!(
            PValueMatrix::new(ids.clone(), vec![0.1, 1.5], prov.clone()),
            Err(MatrixError::ValueOutOfRange { row: 0, col: 1, .. })
        ));
        assert!(matches!(
            PValueMatrix::new(ids.clone(), vec![0.1, 0.5, 0.2], prov.clone()),
            Err(MatrixError::RaggedRow { .. })
        ));
        assert!(matches!(
            PValueMatrix::new(vec!["a".into(), "a".into()], vec![0.1, 0.5], prov),
            Err(MatrixError::DuplicateItem(_))
        ));
    }
}
