use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{load_csv, RawDataset};
use crate::error::{Error, Result};

/// Environment variable overriding the dataset root directory.
pub const DATA_DIR_ENV: &str = "TABDISENT_DATA_DIR";

const BUNDLED_REGISTRY: &str = include_str!("../../data/datasets.toml");

/// One registry entry: where a dataset lives and what it must look like.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub file: PathBuf,
    #[serde(default = "default_label")]
    pub label_column: String,
    pub rows: Option<usize>,
    pub attributes: Option<usize>,
    pub anomalies: Option<usize>,
}

fn default_label() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetRegistry {
    pub datasets: BTreeMap<String, DatasetEntry>,
}

/// Dataset root: `$TABDISENT_DATA_DIR` if set, else the crate's bundled
/// `data/` directory.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data"))
}

impl DatasetRegistry {
    pub fn bundled() -> Self {
        toml::from_str(BUNDLED_REGISTRY).expect("bundled registry parses")
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.into(),
            line: 0,
            column: String::new(),
            message: e.to_string(),
        })
    }

    /// The bundled registry, extended by `datasets.toml` in [`data_dir`] if
    /// that file exists.
    pub fn discover() -> Result<Self> {
        let mut reg = Self::bundled();
        let path = data_dir().join("datasets.toml");
        if path.is_file() {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            reg.datasets.extend(Self::from_toml(&text, &path)?.datasets);
        }
        Ok(reg)
    }

    pub fn entry(&self, name: &str) -> Option<&DatasetEntry> {
        self.datasets.get(&name.to_ascii_lowercase())
    }

    /// Loads `name` from `dir` and checks it against the expected shape.
    pub fn load(&self, name: &str, dir: &Path) -> Result<RawDataset> {
        let entry = self
            .entry(name)
            .ok_or_else(|| Error::Dataset(format!("`{name}` is not in the dataset registry")))?;
        let path = dir.join(&entry.file);
        let mut ds = load_csv(&path, &entry.label_column)?;
        ds.name = name.to_ascii_lowercase();
        entry.check(&ds)?;
        Ok(ds)
    }
}

impl DatasetEntry {
    pub fn check(&self, ds: &RawDataset) -> Result<()> {
        let found = [ds.num_rows(), ds.num_attributes(), ds.num_anomalies()];
        let expected = [self.rows, self.attributes, self.anomalies];
        for ((what, want), got) in ["rows", "attributes", "anomalies"]
            .iter()
            .zip(expected)
            .zip(found)
        {
            if let Some(want) = want {
                if want != got {
                    return Err(Error::Dataset(format!(
                        "{}: expected {want} {what}, found {got}",
                        ds.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Loads a registered dataset from [`data_dir`].
pub fn load_dataset(name: &str) -> Result<RawDataset> {
    DatasetRegistry::discover()?.load(name, &data_dir())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_registry_lists_reference_shapes() {
        let reg = DatasetRegistry::bundled();
        assert_eq!(reg.datasets.len(), 20);
        let thyroid = reg.entry("Thyroid").unwrap();
        assert_eq!(
            (thyroid.rows, thyroid.attributes, thyroid.anomalies),
            (Some(3772), Some(6), Some(93))
        );
    }

    #[test]
    fn bundled_files_match() {
        let reg = DatasetRegistry::bundled();
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
        let b = reg.load("breastw", &dir).unwrap();
        assert_eq!(
            (b.num_rows(), b.num_attributes(), b.num_anomalies()),
            (683, 9, 239)
        );
        let w = reg.load("wine", &dir).unwrap();
        assert_eq!(
            (w.num_rows(), w.num_attributes(), w.num_anomalies()),
            (129, 13, 10)
        );
    }

    #[test]
    fn unknown_name() {
        assert!(DatasetRegistry::bundled()
            .load("nope", Path::new("."))
            .is_err());
    }
}
