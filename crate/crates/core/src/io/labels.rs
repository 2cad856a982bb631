use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maps file label values to class indices `0..D` by sorted order.
///
/// Values are ordered numerically when every label parses as a number and
/// lexicographically otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    values: Vec<String>,
}

impl LabelMap {
    pub fn fit(labels: &[String]) -> Result<Self> {
        let mut values: Vec<String> = labels.to_vec();
        if values.iter().all(|v| v.parse::<f64>().is_ok()) {
            values.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
            values.dedup_by(|a, b| a.parse::<f64>().unwrap() == b.parse::<f64>().unwrap());
        } else {
            values.sort();
            values.dedup();
        }
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 distinct labels, found {}", values.len())));
        }
        Ok(Self { values })
    }

    pub fn from_values(values: Vec<String>) -> Self {
        Self { values }
    }

    pub fn num_classes(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        let numeric = label.parse::<f64>().ok();
        self.values.iter().position(|v| match (numeric, v.parse::<f64>().ok()) {
            (Some(a), Some(b)) => a == b,
            _ => v == label,
        })
    }

    pub fn encode(&self, labels: &[String]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| self.index_of(l).ok_or_else(|| Error::InvalidInput(format!("label {l:?} not in the label map"))))
            .collect()
    }

    pub fn decode(&self, class: usize) -> &str {
        &self.values[class]
    }
}
