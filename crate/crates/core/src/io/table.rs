//! Dense numeric CSV with a header row and one label column.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{LabelMap, RawData};
use crate::error::{Error, Result};
use crate::model::{Dataset, Features};

/// Parses CSV text; `label_column` is a header name or a 0-based column index.
pub fn parse_csv(text: &str, label_column: &str) -> Result<RawData> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .or_else(|| label_column.parse::<usize>().ok().filter(|&i| i < header.len()))
        .ok_or_else(|| Error::InvalidInput(format!("label column {label_column:?} not in header")))?;
    let width = header.len();
    if width < 2 {
        return Err(Error::Parse { line: 1, msg: "need a label column and at least one feature".into() });
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        if record.len() != width {
            return Err(Error::Parse { line, msg: format!("expected {width} fields, found {}", record.len()) });
        }
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse { line, msg: format!("non-numeric cell {cell:?}") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("non-finite cell {cell:?}") });
            }
            values.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::Parse { line: 1, msg: "no data rows".into() });
    }
    let a = Array2::from_shape_vec((labels.len(), width - 1), values).expect("rectangular rows");
    Ok(RawData { features: Features::Dense(a), labels })
}

pub fn read_csv(path: &Path, label_column: &str) -> Result<(Dataset, LabelMap)> {
    parse_csv(&fs::read_to_string(path)?, label_column)?.into_dataset()
}

/// Writes a header `label,f1,...,fN` followed by one row per sample.
pub fn write_csv(path: &Path, dataset: &Dataset, map: &LabelMap) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let n = dataset.num_features();
    let mut header = vec!["label".to_string()];
    header.extend((1..=n).map(|j| format!("f{j}")));
    w.write_record(&header).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let a = dataset.features().to_dense();
    for (m, row) in a.rows().into_iter().enumerate() {
        let mut rec = vec![map.decode(dataset.labels()[m]).to_string()];
        rec.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_file_is_exact() {
        let (ds, map) = parse_csv("a,class,b\n1.5,x,2\n-3,y,0.25\n", "class").unwrap().into_dataset().unwrap();
        assert_eq!(ds.features().to_dense(), ndarray::array![[1.5, 2.0], [-3.0, 0.25]]);
        assert_eq!(ds.labels(), &[0, 1]);
        assert_eq!(map.values(), &["x".to_string(), "y".to_string()]);
        let by_index = parse_csv("a,class,b\n1.5,x,2\n-3,y,0.25\n", "1").unwrap();
        assert_eq!(by_index.labels, vec!["x", "y"]);
    }

    #[test]
    fn malformed_files() {
        assert!(parse_csv("a,label\n", "label").is_err());
        assert!(matches!(parse_csv("a,label\n1,2\nfoo,3\n", "label"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(parse_csv("a,b,label\n1,2,0\n1,1\n", "label"), Err(Error::Parse { line: 3, .. })));
        assert!(parse_csv("a,b\n1,2\n", "missing").is_err());
    }

    #[test]
    fn write_then_read_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let (ds, map) = parse_csv("label,u,v\n2,0.1,1e-300\n7,-5.5,3.3333333333333335\n", "label")
            .unwrap()
            .into_dataset()
            .unwrap();
        write_csv(&path, &ds, &map).unwrap();
        let (back, _) = read_csv(&path, "label").unwrap();
        assert_eq!(back.features().to_dense(), ds.features().to_dense());
        assert_eq!(back.labels(), ds.labels());
    }
}
