//! Ordinal thresholds in the deviation parameterization: a base threshold
//! followed by strictly positive increments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ram::Cell;

/// Lower bound given to free increments.
pub const INCREMENT_LOWER_BOUND: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdColumn {
    pub variable: String,
    pub levels: Vec<String>,
    /// `levels.len() - 1` cells: base threshold, then increments.
    pub deviations: Vec<Cell>,
}

impl ThresholdColumn {
    /// Free thresholds spread evenly over [-1, 1], labelled `<label_stem>_dev<k>`.
    pub fn free(variable: &str, levels: &[String], label_stem: &str) -> Self {
        let k = levels.len().saturating_sub(1);
        let (base, step) = if k > 1 { (-1.0, 2.0 / (k - 1) as f64) } else { (0.0, 0.0) };
        let deviations = (0..k)
            .map(|i| {
                let value = if i == 0 { base } else { step };
                Cell::free(value, &format!("{label_stem}_dev{}", i + 1))
            })
            .collect();
        Self {
            variable: variable.to_string(),
            levels: levels.to_vec(),
            deviations,
        }
    }

    /// All thresholds fixed at the given cumulative values.
    pub fn fixed(variable: &str, levels: &[String], cumulative: &[f64]) -> Result<Self> {
        if cumulative.len() + 1 != levels.len() {
            return Err(Error::Model(format!(
                "`{variable}` has {} levels but {} thresholds were given",
                levels.len(),
                cumulative.len()
            )));
        }
        let mut deviations = Vec::with_capacity(cumulative.len());
        for (i, &t) in cumulative.iter().enumerate() {
            let v = if i == 0 { t } else { t - cumulative[i - 1] };
            if i > 0 && v <= 0.0 {
                return Err(Error::ThresholdOrder(variable.to_string()));
            }
            deviations.push(Cell::fixed(v));
        }
        Ok(Self {
            variable: variable.to_string(),
            levels: levels.to_vec(),
            deviations,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Cumulative thresholds from deviation values.
    pub fn cumulative(&self, deviation_values: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(deviation_values.len());
        let mut acc = 0.0;
        for (i, &d) in deviation_values.iter().enumerate() {
            if i > 0 && !(d > 0.0) {
                return Err(Error::ThresholdOrder(self.variable.clone()));
            }
            acc = if i == 0 { d } else { acc + d };
            out.push(acc);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    columns: Vec<ThresholdColumn>,
}

impl ThresholdSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, column: ThresholdColumn) -> Result<()> {
        if column.levels.len() < 2 {
            return Err(Error::Model(format!(
                "ordinal `{}` needs at least two levels",
                column.variable
            )));
        }
        if column.deviations.len() + 1 != column.levels.len() {
            return Err(Error::Model(format!(
                "`{}` needs {} deviations",
                column.variable,
                column.levels.len() - 1
            )));
        }
        for (i, d) in column.deviations.iter().enumerate() {
            if d.free && d.label.as_deref().is_none_or(str::is_empty) {
                return Err(Error::UnlabeledFreeCell(format!(
                    "thresholds[{}, {i}]",
                    column.variable
                )));
            }
            if i > 0 && !d.free && d.value <= 0.0 {
                return Err(Error::ThresholdOrder(column.variable.clone()));
            }
        }
        match self.columns.iter_mut().find(|c| c.variable == column.variable) {
            Some(c) => *c = column,
            None => self.columns.push(column),
        }
        Ok(())
    }

    pub fn get(&self, variable: &str) -> Option<&ThresholdColumn> {
        self.columns.iter().find(|c| c.variable == variable)
    }

    pub fn get_mut(&mut self, variable: &str) -> Option<&mut ThresholdColumn> {
        self.columns.iter_mut().find(|c| c.variable == variable)
    }

    pub fn columns(&self) -> &[ThresholdColumn] {
        &self.columns
    }

    pub fn columns_mut(&mut self) -> &mut [ThresholdColumn] {
        &mut self.columns
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Fixes the base threshold of `variable`. For a binary censoring indicator this
    /// pins its only threshold at the detection limit.
    pub fn fix_base(&mut self, variable: &str, value: f64) -> Result<()> {
        let col = self
            .get_mut(variable)
            .ok_or_else(|| Error::Model(format!("`{variable}` has no thresholds")))?;
        col.deviations[0] = Cell {
            value,
            free: false,
            label: col.deviations[0].label.clone(),
        };
        Ok(())
    }
}
