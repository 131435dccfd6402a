//! Multi-group models whose groups share parameters by label.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::ColumnTable;
use crate::error::{Error, Result};
use crate::params::ParameterVector;
use crate::ram::{def_column, Matrix, RamModel};
use crate::thresholds::{ThresholdSet, INCREMENT_LOWER_BOUND};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub model: RamModel,
    pub thresholds: ThresholdSet,
    #[serde(skip)]
    pub data: Option<ColumnTable>,
}

impl Group {
    pub fn new(name: &str, model: RamModel) -> Self {
        Self {
            name: name.to_string(),
            model,
            thresholds: ThresholdSet::new(),
            data: None,
        }
    }

    pub fn with_data(mut self, data: ColumnTable) -> Self {
        self.data = Some(data);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedModel {
    pub name: String,
    pub groups: Vec<Group>,
    /// Box constraints per label; threshold increments are bounded automatically.
    pub bounds: BTreeMap<String, (f64, f64)>,
}

/// Where a free label first appears.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelInfo {
    pub label: String,
    pub matrix: Matrix,
    pub cells: usize,
}

impl GroupedModel {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            groups: Vec::new(),
            bounds: BTreeMap::new(),
        }
    }

    pub fn single(model: RamModel) -> Self {
        let name = model.name.clone();
        let mut g = Self::new(&name);
        g.groups.push(Group::new(&name, model));
        g
    }

    pub fn push(&mut self, group: Group) -> Result<()> {
        if self.groups.iter().any(|g| g.name == group.name) {
            return Err(Error::Model(format!("duplicate group `{}`", group.name)));
        }
        self.groups.push(group);
        Ok(())
    }

    pub fn group(&self, name: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn group_mut(&mut self, name: &str) -> Option<&mut Group> {
        self.groups.iter_mut().find(|g| g.name == name)
    }

    pub fn bind(&mut self, group: &str, data: ColumnTable) -> Result<()> {
        let g = self
            .group_mut(group)
            .ok_or_else(|| Error::Model(format!("no group `{group}`")))?;
        g.data = Some(data);
        Ok(())
    }

    pub fn set_bound(&mut self, label: &str, lower: f64, upper: f64) {
        self.bounds.insert(label.to_string(), (lower, upper));
    }

    /// Every label that is free somewhere, in pack order, with its home matrix and cell count.
    pub fn free_labels(&self) -> Result<Vec<LabelInfo>> {
        let mut order: Vec<LabelInfo> = Vec::new();
        let mut pos: HashMap<String, usize> = HashMap::new();
        let mut fixed_labels: HashMap<String, String> = HashMap::new();
        let mut err = None;
        for g in &self.groups {
            let mut visit = |matrix: Matrix, free: bool, label: Option<&str>, at: String| {
                let Some(label) = label else {
                    if free {
                        err.get_or_insert(Error::UnlabeledFreeCell(at));
                    }
                    return;
                };
                if free {
                    if def_column(label).is_some() {
                        err.get_or_insert(Error::FreeDefinitionLabel(label.to_string()));
                        return;
                    }
                    match pos.get(label) {
                        Some(&i) => order[i].cells += 1,
                        None => {
                            pos.insert(label.to_string(), order.len());
                            order.push(LabelInfo {
                                label: label.to_string(),
                                matrix,
                                cells: 1,
                            });
                        }
                    }
                } else {
                    fixed_labels.entry(label.to_string()).or_insert(at);
                }
            };
            g.model.for_each_cell(|matrix, r, c, cell| {
                if cell.free || cell.label.is_some() {
                    visit(
                        matrix,
                        cell.free,
                        cell.label.as_deref(),
                        format!("{}.{}[{r},{c}]", g.name, matrix.as_str()),
                    );
                }
            });
            for col in g.thresholds.columns() {
                for (k, d) in col.deviations.iter().enumerate() {
                    visit(
                        Matrix::Thresholds,
                        d.free,
                        d.label.as_deref(),
                        format!("{}.thresholds[{},{k}]", g.name, col.variable),
                    );
                }
            }
        }
        if let Some(e) = err {
            return Err(e);
        }
        for info in &order {
            if fixed_labels.contains_key(&info.label) {
                return Err(Error::ConflictingFreeFlags(info.label.clone()));
            }
        }
        Ok(order)
    }

    /// Collects one entry per distinct free label, with start values from the first cell seen.
    pub fn pack_parameters(&self) -> Result<ParameterVector> {
        let infos = self.free_labels()?;
        let mut values: HashMap<&str, f64> = HashMap::new();
        let mut increments: std::collections::HashSet<String> = Default::default();
        for g in &self.groups {
            g.model.for_each_cell(|_, _, _, cell| {
                if let (true, Some(l)) = (cell.free, cell.label.as_deref()) {
                    if let Some(info) = infos.iter().find(|i| i.label == l) {
                        values.entry(info.label.as_str()).or_insert(cell.value);
                    }
                }
            });
            for col in g.thresholds.columns() {
                for (k, d) in col.deviations.iter().enumerate() {
                    if let (true, Some(l)) = (d.free, d.label.as_deref()) {
                        if let Some(info) = infos.iter().find(|i| i.label == l) {
                            values.entry(info.label.as_str()).or_insert(d.value);
                        }
                        if k > 0 {
                            increments.insert(l.to_string());
                        }
                    }
                }
            }
        }
        let labels: Vec<String> = infos.iter().map(|i| i.label.clone()).collect();
        let vals = labels.iter().map(|l| values[l.as_str()]).collect();
        let bounds = labels
            .iter()
            .map(|l| {
                self.bounds.get(l).copied().or_else(|| {
                    increments
                        .contains(l)
                        .then_some((INCREMENT_LOWER_BOUND, f64::INFINITY))
                })
            })
            .collect();
        ParameterVector::with_bounds(labels, vals, bounds)
    }

    /// Writes `theta` into every free cell sharing each label.
    pub fn unpack_parameters(&self, theta: &ParameterVector) -> Result<GroupedModel> {
        let mut out = self.clone();
        for (label, &value) in theta.labels().iter().zip(theta.values()) {
            for g in &mut out.groups {
                g.model.set_parameter(label, value);
                for col in g.thresholds.columns_mut() {
                    for d in &mut col.deviations {
                        if d.free && d.label.as_deref() == Some(label) {
                            d.value = value;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Fixes a label at `value` in every group and threshold column.
    pub fn fix_parameter(&mut self, label: &str, value: f64) -> usize {
        let mut n = 0;
        for g in &mut self.groups {
            n += g.model.fix_parameter(label, value);
            for col in g.thresholds.columns_mut() {
                for d in &mut col.deviations {
                    if d.label.as_deref() == Some(label) {
                        d.value = value;
                        d.free = false;
                        n += 1;
                    }
                }
            }
        }
        n
    }

    /// Renames a label everywhere (cells, thresholds, bounds).
    pub fn rename_label(&mut self, from: &str, to: &str) {
        for g in &mut self.groups {
            g.model.rename_label(from, to);
            for col in g.thresholds.columns_mut() {
                for d in &mut col.deviations {
                    if d.label.as_deref() == Some(from) {
                        d.label = Some(to.to_string());
                    }
                }
            }
        }
        if let Some(b) = self.bounds.remove(from) {
            self.bounds.insert(to.to_string(), b);
        }
    }
}
