//! File formats: numeric CSV matrices and attention stacks.
//!
//! Floats are written with 17 significant digits so they read back exactly.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::priors::{AttentionStack, Modality};

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parses a numeric CSV; every row must have the same number of fields.
/// Row and column numbers in errors are 1-based and count the header line.
pub fn read_csv_matrix<R: Read>(reader: R, has_header: bool) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let offset = usize::from(has_header) + 1;
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::MalformedCsv {
            row: r + offset,
            column: 0,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::MalformedCsv {
                    row: r + offset,
                    column: c + 1,
                    message: format!("not a finite number: {field:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::MalformedCsv {
                    row: r + offset,
                    column: row.len().min(first.len()) + 1,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::MalformedCsv { row: offset, column: 0, message: "no data rows".into() });
    }
    linalg::from_rows(&rows)
}

pub fn read_csv_matrix_file(path: &Path, has_header: bool) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path)?;
    read_csv_matrix(file, has_header).map_err(|e| match e {
        Error::MalformedCsv { row, column, message } => Error::MalformedCsv {
            row,
            column,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn write_csv_matrix<W: Write>(mut writer: W, m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        let line: Vec<String> = m.row(i).iter().map(|&v| format_f64(v)).collect();
        writeln!(writer, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn csv_matrix_string(m: &DMatrix<f64>) -> String {
    let mut buf = Vec::new();
    write_csv_matrix(&mut buf, m).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

#[derive(Deserialize)]
struct AttentionFile {
    p: usize,
    n_patches: usize,
    matrices: Vec<Vec<Vec<f64>>>,
}

/// Parses `{"p": .., "n_patches": .., "matrices": [[[..]]]}`.
pub fn parse_attention_json(text: &str, class_id: usize, modality: Modality) -> Result<AttentionStack> {
    let f: AttentionFile = serde_json::from_str(text)?;
    let matrices = f
        .matrices
        .iter()
        .enumerate()
        .map(|(k, rows)| {
            let m = linalg::from_rows(rows)?;
            if m.shape() != (f.p, f.n_patches) {
                return Err(Error::DimensionMismatch(format!(
                    "attention matrix {k} is {:?}, file declares {}x{}",
                    m.shape(),
                    f.p,
                    f.n_patches
                )));
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    AttentionStack::new(matrices, class_id, modality)
}

/// Loads an attention stack from a JSON file or from a directory of CSV
/// matrices (read in file-name order, no header rows).
pub fn read_attention_stack(path: &Path, class_id: usize, modality: Modality) -> Result<AttentionStack> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        let matrices = files
            .iter()
            .map(|f| read_csv_matrix_file(f, false))
            .collect::<Result<Vec<_>>>()?;
        AttentionStack::new(matrices, class_id, modality)
    } else {
        parse_attention_json(&std::fs::read_to_string(path)?, class_id, modality)
    }
}
