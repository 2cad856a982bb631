use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Features};

/// Feature transformation applied in the given order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    /// Entrywise base-2 logarithm; every entry must be positive.
    Log2,
    /// Per-column standardization with statistics from the fitting set.
    Zscore,
}

impl std::str::FromStr for Step {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "log2" => Ok(Self::Log2),
            "zscore" => Ok(Self::Zscore),
            other => Err(Error::InvalidInput(format!("unknown preprocessing step {other:?}"))),
        }
    }
}

/// Fitted preprocessing pipeline, reusable on held-out data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub steps: Vec<Step>,
    pub input_features: usize,
    /// Columns kept after dropping constant ones (all columns without z-scoring).
    pub kept: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn log2_dense(features: &Features) -> Result<Array2<f64>> {
    let a = features.to_dense();
    if let Some(bad) = a.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::InvalidInput(format!("log2 needs positive features, found {bad}")));
    }
    Ok(a.mapv(f64::log2))
}

impl Preprocessor {
    pub fn identity(num_features: usize) -> Self {
        Self { steps: vec![], input_features: num_features, kept: (0..num_features).collect(), mean: vec![], std: vec![] }
    }

    /// Fits z-score statistics (after any earlier steps) on `features`.
    pub fn fit(features: &Features, steps: &[Step]) -> Result<Self> {
        let n = features.ncols();
        let mut out = Self { steps: steps.to_vec(), ..Self::identity(n) };
        if !steps.contains(&Step::Zscore) {
            return Ok(out);
        }
        if steps.iter().filter(|&&s| s == Step::Zscore).count() > 1 {
            return Err(Error::InvalidInput("z-scoring listed twice".into()));
        }
        let mut a = features.to_dense();
        for step in steps.iter().take_while(|&&s| s != Step::Zscore) {
            if *step == Step::Log2 {
                a = log2_dense(&Features::Dense(a))?;
            }
        }
        let mean = a.mean_axis(Axis(0)).expect("non-empty");
        let std = a.std_axis(Axis(0), 0.0);
        let mut kept = Vec::new();
        for j in 0..n {
            if std[j] > 1e-12 * mean[j].abs() && std[j] > 0.0 {
                kept.push(j);
            }
        }
        let dropped = n - kept.len();
        if dropped > 0 {
            log::warn!("dropping {dropped} constant feature column(s) before z-scoring");
        }
        if kept.is_empty() {
            return Err(Error::InvalidInput("every feature column is constant".into()));
        }
        out.mean = kept.iter().map(|&j| mean[j]).collect();
        out.std = kept.iter().map(|&j| std[j]).collect();
        out.kept = kept;
        Ok(out)
    }

    pub fn output_features(&self) -> usize {
        self.kept.len()
    }

    pub fn apply_features(&self, features: &Features) -> Result<Features> {
        if features.ncols() != self.input_features {
            return Err(Error::DimensionMismatch(format!(
                "preprocessor fitted on {} features, got {}",
                self.input_features,
                features.ncols()
            )));
        }
        if self.steps.is_empty() {
            return Ok(features.clone());
        }
        let mut a = features.to_dense();
        let mut zscored = false;
        for step in &self.steps {
            match step {
                Step::Log2 => {
                    if zscored {
                        return Err(Error::InvalidInput("log2 after z-scoring would see negative values".into()));
                    }
                    a = log2_dense(&Features::Dense(a))?;
                }
                Step::Zscore => {
                    let mut out = Array2::zeros((a.nrows(), self.kept.len()));
                    for (c, &j) in self.kept.iter().enumerate() {
                        let (m, s) = (self.mean[c], self.std[c]);
                        out.column_mut(c).assign(&a.column(j).mapv(|v| (v - m) / s));
                    }
                    a = out;
                    zscored = true;
                }
            }
        }
        Ok(Features::Dense(a))
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        Dataset::new(self.apply_features(dataset.features())?, dataset.labels().to_vec(), dataset.num_classes())
    }
}

/// Fits the steps on `dataset` and applies them to it.
pub fn preprocess(dataset: &Dataset, steps: &[Step]) -> Result<Dataset> {
    Preprocessor::fit(dataset.features(), steps)?.apply(dataset)
}
