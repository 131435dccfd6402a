//! Builders for twin and causal designs.

pub mod clpm;
pub mod icu;
pub mod mrdoc;
pub mod sexlim;
pub mod twin;

use crate::data::{Column, ColumnTable};
use crate::error::{Error, Result};
use crate::model::Group;
use crate::thresholds::ThresholdColumn;

pub use clpm::{build_clpm, ClpmSpec, ClpmVariant};
pub use icu::icu_model;
pub use mrdoc::{build_mrdoc, MrDocSpec, MrDocVariant};
pub use sexlim::{build_sexlim, Qualitative, SexLimSpec, SexLimVariant, SEXLIM_GROUPS};
pub use twin::{ace_paths, build_ace, twin_maker, twin_model, AceSpec, TwinOptions};

/// Column name for twin `twin` (1 or 2) of `base`.
pub fn twin_column(base: &str, sep: &str, twin: usize) -> String {
    format!("{base}{sep}{twin}")
}

pub(crate) fn require_columns(data: &ColumnTable, group: &str, columns: &[String]) -> Result<()> {
    let missing: Vec<&str> = columns
        .iter()
        .filter(|c| !data.has(c))
        .map(String::as_str)
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Data(format!(
            "{group} data lacks column(s): {}",
            missing.join(", ")
        )))
    }
}

/// Sample mean and (n − 1) variance of the observed values.
pub(crate) fn mean_var(xs: &[Option<f64>]) -> Option<(f64, f64)> {
    let xs: Vec<f64> = xs.iter().flatten().copied().collect();
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    Some((m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)))
}

pub(crate) fn ordinal_levels(data: &ColumnTable, column: &str) -> Option<Vec<String>> {
    match data.get(column)? {
        Column::Ordinal { levels, .. } => Some(levels.clone()),
        _ => None,
    }
}

/// Adds free thresholds labelled by `stem` for `column` when it is ordinal in `data`.
/// Returns whether a threshold column was added.
pub(crate) fn wire_ordinal(group: &mut Group, data: &ColumnTable, column: &str, stem: &str) -> Result<bool> {
    match ordinal_levels(data, column) {
        Some(levels) => {
            group
                .thresholds
                .insert(ThresholdColumn::free(column, &levels, stem))?;
            Ok(true)
        }
        None => Ok(false),
    }
}
