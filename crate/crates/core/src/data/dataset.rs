use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// A labelled tabular dataset as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub name: String,
    pub feature_names: Vec<String>,
    /// `N x D`.
    pub features: Tensor,
    /// 0 = normal, 1 = anomaly.
    pub labels: Vec<u8>,
}

impl RawDataset {
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        features: Tensor,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let ds = Self {
            name: name.into(),
            feature_names,
            features,
            labels,
        };
        ds.check()?;
        Ok(ds)
    }

    fn check(&self) -> Result<()> {
        let [n, d] = *self.features.shape() else {
            return Err(Error::Dataset(format!(
                "features must be N x D, got {:?}",
                self.features.shape()
            )));
        };
        if self.labels.len() != n || self.feature_names.len() != d {
            return Err(Error::Dataset(format!(
                "{n} rows x {d} columns but {} labels and {} names",
                self.labels.len(),
                self.feature_names.len()
            )));
        }
        if self.labels.iter().any(|&l| l > 1) {
            return Err(Error::Dataset("labels must be 0 or 1".into()));
        }
        let anomalies = self.num_anomalies();
        if anomalies == 0 || anomalies == n {
            return Err(Error::Dataset(format!(
                "{}: both classes must be present ({anomalies} anomalies in {n} rows)",
                self.name
            )));
        }
        Ok(())
    }

    pub fn num_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.features.shape()[1]
    }

    pub fn num_anomalies(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn normal_indices(&self) -> Vec<usize> {
        (0..self.num_rows())
            .filter(|&i| self.labels[i] == 0)
            .collect()
    }

    pub fn anomaly_indices(&self) -> Vec<usize> {
        (0..self.num_rows())
            .filter(|&i| self.labels[i] == 1)
            .collect()
    }
}

/// Feature matrix and optional labels read from a CSV file.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub feature_names: Vec<String>,
    pub features: Tensor,
    pub labels: Option<Vec<u8>>,
}

/// Reads a headed, comma-separated numeric table. Every column except
/// `label_column` is a feature. When `label_column` is `Some`, the column
/// must exist and hold 0/1 values.
pub fn read_csv_table(path: &Path, label_column: Option<&str>) -> Result<CsvTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let label_idx = match label_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse {
                    path: path.into(),
                    line: 1,
                    column: name.into(),
                    message: "label column not found in header".into(),
                })?,
        ),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| Some(i) != label_idx)
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::Dataset(format!(
            "{}: no feature columns",
            path.display()
        )));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(Error::Parse {
                path: path.into(),
                line,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for &c in &feature_cols {
            let cell = &record[c];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.into(),
                line,
                column: headers[c].clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    column: headers[c].clone(),
                    message: format!("`{cell}` is not a finite number"),
                });
            }
            values.push(v);
        }
        if let Some(li) = label_idx {
            let cell = &record[li];
            let label = match cell.parse::<f64>() {
                Ok(0.0) => 0,
                Ok(1.0) => 1,
                _ => {
                    return Err(Error::Parse {
                        path: path.into(),
                        line,
                        column: headers[li].clone(),
                        message: format!("label `{cell}` is not 0 or 1"),
                    })
                }
            };
            labels.push(label);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Dataset(format!("{}: no data rows", path.display())));
    }
    Ok(CsvTable {
        feature_names: feature_cols.iter().map(|&c| headers[c].clone()).collect(),
        features: Tensor::new(&[rows, feature_cols.len()], values)?,
        labels: label_idx.map(|_| labels),
    })
}

/// Loads a labelled dataset. The dataset name is the file stem.
pub fn load_csv(path: &Path, label_column: &str) -> Result<RawDataset> {
    let table = read_csv_table(path, Some(label_column))?;
    let name = path.file_stem().map_or_else(
        || "dataset".to_owned(),
        |s| s.to_string_lossy().into_owned(),
    );
    RawDataset::new(
        name,
        table.feature_names,
        table.features,
        table.labels.expect("label column requested"),
    )
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.into(),
            line,
            column: String::new(),
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_small_file() {
        let f = write("a,b,label\n1,2,0\n3,4.5,0\n-1,0,1\n");
        let ds = load_csv(f.path(), "label").unwrap();
        assert_eq!(ds.num_rows(), 3);
        assert_eq!(ds.num_attributes(), 2);
        assert_eq!(ds.num_anomalies(), 1);
        assert_eq!(ds.features.row(1), &[3.0, 4.5]);
        assert_eq!(ds.feature_names, ["a", "b"]);
    }

    #[test]
    fn label_column_can_sit_anywhere() {
        let f = write("label,a\n0,1\n1,2\n");
        let ds = load_csv(f.path(), "label").unwrap();
        assert_eq!(ds.features.data(), &[1.0, 2.0]);
        assert_eq!(ds.labels, [0, 1]);
    }

    #[test]
    fn nan_cell_names_location() {
        let f = write("a,b,label\n1,2,0\n3,NaN,1\n");
        match load_csv(f.path(), "label") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "b");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_bad_labels() {
        let f = write("a,label\nx,0\n2,1\n");
        assert!(matches!(
            load_csv(f.path(), "label"),
            Err(Error::Parse { .. })
        ));
        let f = write("a,label\n1,2\n2,1\n");
        assert!(matches!(
            load_csv(f.path(), "label"),
            Err(Error::Parse { .. })
        ));
        let f = write("a,label\n1,0\n2,0\n");
        assert!(matches!(
            load_csv(f.path(), "label"),
            Err(Error::Dataset(_))
        ));
        let f = write("a,b\n1,0\n");
        assert!(matches!(
            load_csv(f.path(), "label"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn missing_file() {
        let err = load_csv(Path::new("/nonexistent/data.csv"), "label").unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err:?}");
    }

    #[test]
    fn unlabeled_table() {
        let f = write("a,b\n1,2\n3,4\n");
        let t = read_csv_table(f.path(), None).unwrap();
        assert!(t.labels.is_none());
        assert_eq!(t.features.shape(), &[2, 2]);
    }
}
