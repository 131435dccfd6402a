//! Structural equation modelling in the RAM parameterization with
//! full-information maximum likelihood, ordinal thresholds, definition
//! variables and builders for twin and causal designs.

pub mod data;
pub mod error;
pub mod estimate;
pub mod fiml;
pub mod model;
pub mod mvn;
pub mod optim;
pub mod params;
pub mod prep;
pub mod parser;
pub mod ram;
pub mod sim;
pub mod thresholds;
pub mod builders;

pub use data::{Column, ColumnTable};
pub use error::{Error, Result};
pub use estimate::{fit, fit_from, lrt, standard_errors, Estimate, FitOptions, FitResult, Lrt, ReportFormat};
pub use fiml::{row_neg2ll, total_neg2ll, reachable_defvar_targets, FimlObjective, GroupStats};
pub use model::{Group, GroupedModel};
pub use optim::OptimStatus;
pub use params::ParameterVector;
pub use parser::{parse_exchange, parse_exchange_str, parse_onyx_export, ExchangeDocument, ParsedPathSet};
pub use ram::{expected_moments, Cell, Matrix, Moments, PathSpec, RamModel};
pub use thresholds::{ThresholdColumn, ThresholdSet};
