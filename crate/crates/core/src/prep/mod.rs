//! Table-in, table-out data preparation.

pub mod bincont;
pub mod placeholder;
pub mod residualize;
pub mod scale;
pub mod summarize;

pub use bincont::{make_bin_cont_pair, BIN_LEVELS};
pub use placeholder::{update_covariate_placeholders, validate_placeholders, PlaceholderWarning, PLACEHOLDER};
pub use residualize::{parse_formula, residualize, Formula, ResidualSpec, Residualized};
pub use scale::scale_wide_twin;
pub use summarize::{summarize_twin_data, summary_table, TwinSummary, ZygosityLabels};

/// `base` followed by each suffix, or just `base` when there are none.
pub(crate) fn expand(base: &str, suffixes: Option<&[String]>) -> Vec<String> {
    match suffixes {
        Some(s) if !s.is_empty() => s.iter().map(|x| format!("{base}{x}")).collect(),
        _ => vec![base.to_string()],
    }
}
