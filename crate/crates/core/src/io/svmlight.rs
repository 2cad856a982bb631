//! SVMLight text format: `label idx:val idx:val ...` with 1-based ascending
//! indices. Blank lines and `#` comments are skipped.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{LabelMap, RawData};
use crate::error::{Error, Result};
use crate::model::{CsrMatrix, Dataset, Features};

/// Parses SVMLight text. The column count is the largest index unless
/// `num_features` is given (which must cover every index).
pub fn parse_svmlight(text: &str, num_features: Option<usize>) -> Result<RawData> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = tokens.next().expect("non-empty line has a token");
        if label.contains(':') {
            return Err(Error::Parse { line: line_no, msg: "missing label".into() });
        }
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            if tok.starts_with("qid:") {
                continue;
            }
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| Error::Parse { line: line_no, msg: format!("expected idx:val, got {tok:?}") })?;
            let index: usize =
                i.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("bad feature index {i:?}") })?;
            let value: f64 =
                v.parse().map_err(|_| Error::Parse { line: line_no, msg: format!("bad feature value {v:?}") })?;
            if index == 0 {
                return Err(Error::Parse { line: line_no, msg: "feature indices are 1-based".into() });
            }
            if index <= last {
                return Err(Error::Parse { line: line_no, msg: format!("index {index} not ascending") });
            }
            if !value.is_finite() {
                return Err(Error::Parse { line: line_no, msg: format!("non-finite value {v:?}") });
            }
            last = index;
            row.push((index - 1, value));
        }
        max_index = max_index.max(last);
        rows.push(row);
        labels.push(label.to_string());
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no samples in file".into() });
    }
    let ncols = match num_features {
        Some(n) if n < max_index => {
            return Err(Error::InvalidInput(format!("feature index {max_index} exceeds requested width {n}")))
        }
        Some(n) => n,
        None => max_index,
    };
    if ncols == 0 {
        return Err(Error::Parse { line: 0, msg: "no features in file".into() });
    }
    Ok(RawData { features: Features::sparse(CsrMatrix::from_rows(ncols, &rows)?), labels })
}

pub fn read_svmlight(path: &Path, num_features: Option<usize>) -> Result<(Dataset, LabelMap)> {
    parse_svmlight(&fs::read_to_string(path)?, num_features)?.into_dataset()
}

/// Writes nonzero entries with full round-trip precision.
pub fn write_svmlight(path: &Path, dataset: &Dataset, map: &LabelMap) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for m in 0..dataset.num_samples() {
        write!(out, "{}", map.decode(dataset.labels()[m]))?;
        for (j, v) in dataset.features().row_entries(m) {
            if v != 0.0 {
                write!(out, " {}:{v:?}", j + 1)?;
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
