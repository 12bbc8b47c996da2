//! Dataset loading, the one-class split, normalization, patch splitting and
//! contamination.

mod dataset;
mod patch;
mod registry;
mod split;

pub use dataset::{load_csv, read_csv_table, CsvTable, RawDataset};
pub use patch::{patch_split, PatchLayout};
pub use registry::{data_dir, load_dataset, DatasetEntry, DatasetRegistry, DATA_DIR_ENV};
pub use split::{
    contaminate, contamination_count, normalize, split_train_test, DatasetSplit, Normalization,
    NormalizationScheme, DEGENERATE_SCALE,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::Tensor;

/// Maps raw `N x D` rows to model input `N x attributes x channels`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InputTransform {
    pub normalization: Option<Normalization>,
    pub layout: PatchLayout,
}

impl InputTransform {
    pub fn apply(&self, raw: &Tensor) -> Result<Tensor> {
        let x = match &self.normalization {
            Some(n) => n.apply(raw)?,
            None => raw.clone(),
        };
        patch_split(&x, self.layout)
    }

    /// `(attributes, channels)` of the transformed rows.
    pub fn output_dims(&self, raw_attributes: usize) -> (usize, usize) {
        self.layout.output_dims(raw_attributes)
    }
}
