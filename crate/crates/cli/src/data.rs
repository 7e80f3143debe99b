//! CSV ingestion: header row, feature columns plus one integer label column.
//! Rows whose L2 norm exceeds the certified bound are rescaled onto it
//! (direction preserved) and counted, never silently altered.

use std::path::Path;

use sgld_core::types::{l2_norm, Dataset};

use crate::error::{CliError, Result};

#[derive(Debug)]
pub struct LoadedCsv {
    pub dataset: Dataset,
    pub rescaled_rows: usize,
}

pub fn load_csv(path: &Path, label_column: &str, norm_bound: f64) -> Result<LoadedCsv> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Config(format!("{}: cannot read header row: {e}", path.display())))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| {
            CliError::Config(format!(
                "{}: missing label column '{label_column}'",
                path.display()
            ))
        })?;
    let p = headers.len() - 1;
    if p == 0 {
        return Err(CliError::Config(format!(
            "{}: no feature columns besides the label",
            path.display()
        )));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut max_label = 0usize;
    let mut rescaled_rows = 0usize;
    let mut row = Vec::with_capacity(p);
    for record in reader.records() {
        let record =
            record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let line = record.position().map(|pos| pos.line()).unwrap_or(0);
        row.clear();
        for (idx, field) in record.iter().enumerate() {
            if idx == label_idx {
                let label: i64 = field.trim().parse().map_err(|_| {
                    CliError::Config(format!(
                        "{} line {line}: label '{field}' is not an integer",
                        path.display()
                    ))
                })?;
                if label < 0 {
                    return Err(CliError::Config(format!(
                        "{} line {line}: label {label} is negative",
                        path.display()
                    )));
                }
                let label = label as usize;
                max_label = max_label.max(label);
                labels.push(label);
            } else {
                let value: f64 = field.trim().parse().map_err(|_| {
                    CliError::Config(format!(
                        "{} line {line}: cannot parse '{field}' as a number",
                        path.display()
                    ))
                })?;
                row.push(value);
            }
        }
        let norm = l2_norm(&row);
        if norm > norm_bound {
            let scale = norm_bound / norm;
            for v in &mut row {
                *v *= scale;
            }
            rescaled_rows += 1;
        }
        features.extend_from_slice(&row);
    }

    let dataset = Dataset::labeled(features, labels, p, max_label + 1, norm_bound)?;
    Ok(LoadedCsv {
        dataset,
        rescaled_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_and_counts_rescales() {
        let f = write_csv("x0,x1,label\n0.3,0.4,0\n1.2,1.6,1\n0.0,0.5,0\n");
        let loaded = load_csv(f.path(), "label", 1.0).unwrap();
        assert_eq!(loaded.dataset.n(), 3);
        assert_eq!(loaded.dataset.class_count(), 2);
        // second row has norm 2.0 and gets pulled onto the bound
        assert_eq!(loaded.rescaled_rows, 1);
        let r = loaded.dataset.row(1);
        assert!((r[0] - 0.6).abs() < 1e-12 && (r[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn missing_label_column_is_a_config_error() {
        let f = write_csv("x0,x1,y\n0.3,0.4,0\n0.1,0.2,1\n");
        let err = load_csv(f.path(), "label", 1.0).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let f = write_csv("x0,label\n0.3,0\nnot_a_number,1\n");
        let err = load_csv(f.path(), "label", 1.0).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");

        let f = write_csv("x0,label\n0.3,0\n0.4,1.5\n");
        let err = load_csv(f.path(), "label", 1.0).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(err.to_string().contains("not an integer"), "{err}");
    }
}
