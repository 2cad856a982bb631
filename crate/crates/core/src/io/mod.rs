//! Dataset files, preprocessing, splitting and run reports.

mod labels;
mod preprocess;
mod report;
mod split;
mod svmlight;
mod table;

pub use labels::LabelMap;
pub use preprocess::{preprocess, Preprocessor, Step};
pub use report::{DatasetDescriptor, PhaseTimes, ReportRecord};
pub use split::{error_rate_estimate, fold_split, fraction_split};
pub use svmlight::{parse_svmlight, read_svmlight, write_svmlight};
pub use table::{parse_csv, read_csv, write_csv};

use crate::error::Result;
use crate::model::{Dataset, Features};

/// Features with labels as they appear in the file.
#[derive(Debug, Clone)]
pub struct RawData {
    pub features: Features,
    pub labels: Vec<String>,
}

impl RawData {
    /// Builds a dataset with a label map fitted on these labels.
    pub fn into_dataset(self) -> Result<(Dataset, LabelMap)> {
        let map = LabelMap::fit(&self.labels)?;
        let encoded = map.encode(&self.labels)?;
        Ok((Dataset::new(self.features, encoded, map.num_classes())?, map))
    }

    /// Builds a dataset using an existing label map.
    pub fn into_dataset_with(self, map: &LabelMap) -> Result<Dataset> {
        let encoded = map.encode(&self.labels)?;
        Dataset::new(self.features, encoded, map.num_classes())
    }
}
