use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Free parameters in pack order: one entry per distinct label.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    labels: Vec<String>,
    values: Vec<f64>,
    bounds: Vec<Option<(f64, f64)>>,
}

impl ParameterVector {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let bounds = vec![None; labels.len()];
        Self::with_bounds(labels, values, bounds)
    }

    pub fn with_bounds(
        labels: Vec<String>,
        values: Vec<f64>,
        bounds: Vec<Option<(f64, f64)>>,
    ) -> Result<Self> {
        if labels.len() != values.len() || labels.len() != bounds.len() {
            return Err(Error::Model(format!(
                "parameter vector length mismatch: {} labels, {} values, {} bounds",
                labels.len(),
                values.len(),
                bounds.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Model(format!("duplicate parameter label `{l}`")));
            }
        }
        Ok(Self {
            labels,
            values,
            bounds,
        })
    }

    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, f64)]) -> Result<Self> {
        Self::new(
            pairs.iter().map(|(l, _)| l.as_ref().to_string()).collect(),
            pairs.iter().map(|(_, v)| *v).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn bounds(&self) -> &[Option<(f64, f64)>] {
        &self.bounds
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.values[i])
    }

    pub fn set(&mut self, label: &str, value: f64) -> Result<()> {
        let i = self
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::MissingParameter(label.to_string()))?;
        self.values[i] = value;
        Ok(())
    }

    /// Label -> position lookup.
    pub fn index(&self) -> HashMap<String, usize> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect()
    }

    pub fn with_values(&self, values: &[f64]) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            labels: self.labels.clone(),
            values: values.to_vec(),
            bounds: self.bounds.clone(),
        }
    }
}
