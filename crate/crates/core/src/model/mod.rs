//! Datasets, weight matrices, prediction and sparsity metrics.

mod features;

pub use features::{CsrMatrix, Features};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labelled training data. Labels are zero-based class indices in `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Features,
    labels: Vec<usize>,
    num_classes: usize,
    frobenius_sq: f64,
}

impl Dataset {
    pub fn new(features: Features, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::InvalidInput("dataset needs at least one sample and one feature".into()));
        }
        if num_classes < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 classes, got {num_classes}")));
        }
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} samples",
                labels.len(),
                features.nrows()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidInput(format!("label {bad} outside 0..{num_classes}")));
        }
        let frobenius_sq = features.frobenius_sq();
        Ok(Self { features, labels, num_classes, frobenius_sq })
    }

    pub fn dense(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        Self::new(Features::Dense(features), labels, num_classes)
    }

    pub fn features(&self) -> &Features {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    /// Cached `‖A‖²_F`.
    pub fn frobenius_sq(&self) -> f64 {
        self.frobenius_sq
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Dataset::new(self.features.select_rows(rows), labels, self.num_classes)
    }
}

/// N×D classifier weights; column `d` scores class `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "WeightFile", try_from = "WeightFile")]
pub struct WeightMatrix(Array2<f64>);

impl WeightMatrix {
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite".into()));
        }
        Ok(Self(weights))
    }

    pub fn zeros(num_features: usize, num_classes: usize) -> Self {
        Self(Array2::zeros((num_features, num_classes)))
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<f64> {
        self.0
    }

    pub fn num_features(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.0.ncols()
    }

    /// Class scores `Xᵀa`.
    pub fn scores(&self, features: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        if features.len() != self.num_features() {
            return Err(Error::DimensionMismatch(format!(
                "{} features for weights with {} rows",
                features.len(),
                self.num_features()
            )));
        }
        Ok(self.0.t().dot(&features).to_vec())
    }

    pub fn sparsity(&self) -> Result<SparsityReport> {
        Ok(SparsityReport { l0: l0(self), k99: k99(self)? })
    }
}

#[derive(Serialize, Deserialize)]
struct WeightFile {
    num_features: usize,
    num_classes: usize,
    /// Row-major, `num_features * num_classes` entries.
    values: Vec<f64>,
}

impl From<WeightMatrix> for WeightFile {
    fn from(w: WeightMatrix) -> Self {
        let (n, d) = w.0.dim();
        WeightFile { num_features: n, num_classes: d, values: w.0.iter().copied().collect() }
    }
}

impl TryFrom<WeightFile> for WeightMatrix {
    type Error = Error;

    fn try_from(f: WeightFile) -> Result<Self> {
        let arr = Array2::from_shape_vec((f.num_features, f.num_classes), f.values)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        WeightMatrix::new(arr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub l0: usize,
    pub k99: usize,
}

/// Index of the largest score; ties go to the smallest index.
pub fn predict(weights: &WeightMatrix, features: ArrayView1<'_, f64>) -> Result<usize> {
    Ok(argmax(&weights.scores(features)?))
}

/// Predict every row of a feature matrix.
pub fn predict_all(weights: &WeightMatrix, features: &Features) -> Result<Vec<usize>> {
    if features.ncols() != weights.num_features() {
        return Err(Error::DimensionMismatch(format!(
            "{} features for weights with {} rows",
            features.ncols(),
            weights.num_features()
        )));
    }
    let scores = features.mul(weights.as_array().view());
    Ok(scores.rows().into_iter().map(|r| argmax(r.as_slice().unwrap_or(&r.to_vec()))).collect())
}

pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (d, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = d;
        }
    }
    best
}

/// Number of entries that are not exactly zero.
pub fn l0(weights: &WeightMatrix) -> usize {
    weights.0.iter().filter(|&&w| w != 0.0).count()
}

/// Fewest entries (largest magnitudes first) holding 99% of the Frobenius norm.
pub fn k99(weights: &WeightMatrix) -> Result<usize> {
    let mut sq: Vec<f64> = weights.0.iter().map(|w| w * w).collect();
    let total: f64 = sq.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroWeights);
    }
    sq.sort_unstable_by(|a, b| b.total_cmp(a));
    // Σ_top-k ≥ 0.99²·Σ, with a few ulps of slack for the summation order.
    let target = 0.99 * 0.99 * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    for (k, v) in sq.iter().enumerate() {
        acc += v;
        if acc >= target {
            return Ok(k + 1);
        }
    }
    Ok(sq.len())
}
