use serde::{Deserialize, Serialize};

use crate::input::Hyperparameters;

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub tuning: f64,
    pub training: f64,
    pub evaluation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub source: String,
    pub num_samples: usize,
    pub num_features: usize,
    pub num_classes: usize,
    /// Original label value of each class index.
    pub labels: Vec<String>,
    pub test_samples: Option<usize>,
}

/// One run summary, emitted as a single JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub run_id: String,
    pub mode: String,
    pub moment_method: Option<String>,
    pub tuner: String,
    pub iterations: usize,
    pub converged: bool,
    pub times: PhaseTimes,
    pub error_rate: Option<f64>,
    pub error_se: Option<f64>,
    pub k99: Option<usize>,
    pub l0: usize,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
    pub dataset: DatasetDescriptor,
}

impl ReportRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
