//! CSV matrix files: an optional `# {provenance json}` line, a header
//! `seq_index,<item ids>`, then one row per sequence. Values are written with
//! 17 significant digits, which round-trips every f64 exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{check_value, MatrixError, MatrixSource, PValueMatrix, Provenance};
use crate::sts162::item_ids;

pub fn write_csv(mat: &PValueMatrix, path: &Path) -> Result<(), MatrixError> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    let json = serde_json::to_string(mat.provenance()).map_err(|e| MatrixError::format("header", e))?;
    writeln!(file, "# {json}")?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    let mut header = vec!["seq_index".to_string()];
    header.extend(mat.item_ids().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    let mut record = Vec::with_capacity(mat.k() + 1);
    for (j, row) in mat.rows().enumerate() {
        record.clear();
        record.push((j + 1).to_string());
        record.extend(row.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> MatrixError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => MatrixError::Io(io),
        other => MatrixError::format("csv", format!("{other:?}")),
    }
}

struct Parsed {
    provenance: Option<Provenance>,
    header: Vec<String>,
    /// Rows of values in file column order.
    rows: Vec<Vec<f64>>,
}

fn parse(text: &str) -> Result<Parsed, MatrixError> {
    let (provenance, body, line_offset) = match text.strip_prefix('#') {
        Some(rest) => {
            let (first, body) = rest.split_once('\n').unwrap_or((rest, ""));
            let first = first.trim();
            let prov = if first.starts_with('{') {
                Some(serde_json::from_str(first).map_err(|e| MatrixError::format("line 1", e))?)
            } else {
                None
            };
            (prov, body, 1)
        }
        None => (None, text, 0),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(body.as_bytes());
    let header_rec = reader.headers().map_err(csv_err)?.clone();
    let mut header: Vec<String> = header_rec.iter().map(|s| s.trim().to_string()).collect();
    if header.first().map(String::as_str) != Some("seq_index") {
        return Err(MatrixError::format(
            format!("line {}", line_offset + 1),
            "header must start with seq_index",
        ));
    }
    header.remove(0);
    if header.is_empty() {
        return Err(MatrixError::format(format!("line {}", line_offset + 1), "no item columns"));
    }
    let k = header.len();
    let mut rows = Vec::new();
    for (j, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = line_offset + 2 + j;
        if rec.len() != k + 1 {
            return Err(MatrixError::RaggedRow { row: j, found: rec.len().saturating_sub(1), expected: k });
        }
        rec[0].trim().parse::<u64>().map_err(|_| {
            MatrixError::format(format!("line {line}"), format!("bad seq_index {:?}", &rec[0]))
        })?;
        let mut row = Vec::with_capacity(k);
        for (i, field) in rec.iter().skip(1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                MatrixError::format(format!("line {line}, column {}", i + 2), format!("bad number {field:?}"))
            })?;
            check_value(j, i, v)?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(Parsed { provenance, header, rows })
}

/// Loads a CSV matrix and reorders its columns to `expected_items`
/// (the canonical 162 items when `None`). Ids outside the expected list,
/// duplicated ids, and missing ids are all rejected.
pub fn import_csv(path: &Path, expected_items: Option<&[String]>) -> Result<PValueMatrix, MatrixError> {
    let parsed = parse(&fs::read_to_string(path)?)?;
    let canonical;
    let expected = match expected_items {
        Some(e) => e,
        None => {
            canonical = item_ids();
            &canonical
        }
    };
    let mut source_col = vec![None; expected.len()];
    for (col, id) in parsed.header.iter().enumerate() {
        let target = expected
            .iter()
            .position(|e| e == id)
            .ok_or_else(|| MatrixError::UnknownItem(id.clone()))?;
        if source_col[target].replace(col).is_some() {
            return Err(MatrixError::DuplicateItem(id.clone()));
        }
    }
    let order: Vec<usize> = source_col
        .iter()
        .zip(expected)
        .map(|(c, id)| c.ok_or_else(|| MatrixError::MissingItem(id.clone())))
        .collect::<Result<_, _>>()?;
    let values: Vec<f64> = parsed
        .rows
        .iter()
        .flat_map(|row| order.iter().map(move |&c| row[c]))
        .collect();
    let provenance = parsed.provenance.unwrap_or_else(|| Provenance {
        source: MatrixSource::Import { path: path.display().to_string() },
        n: None,
        params: None,
        warnings: Vec::new(),
    });
    PValueMatrix::new(expected.to_vec(), values, provenance)
}

/// Loads a CSV matrix. Files carrying a provenance line keep their column
/// order; anything else is imported against the canonical items.
pub fn read_csv(path: &Path) -> Result<PValueMatrix, MatrixError> {
    let text = fs::read_to_string(path)?;
    let parsed = parse(&text)?;
    match parsed.provenance {
        Some(prov) => {
            let values = parsed.rows.concat();
            PValueMatrix::new(parsed.header, values, prov)
        }
        None => import_csv(path, None),
    }
}
