//! Run configuration: the exchange document plus design, data, prep and output settings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use twinsem::prep::{make_bin_cont_pair, parse_formula, residualize, scale_wide_twin, update_covariate_placeholders};
use twinsem::prep::{validate_placeholders, ResidualSpec};
use twinsem::{ColumnTable, FitOptions, ReportFormat};

use crate::fail::{fail, CliError, Kind};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub manifests: Vec<String>,
    #[serde(default)]
    pub latents: Vec<String>,
    #[serde(default)]
    pub defvars: Vec<String>,
    #[serde(default)]
    pub paths: Vec<serde_json::Value>,
    /// Onyx export or exchange JSON, read in place of inline `paths`.
    pub paths_file: Option<PathBuf>,
    #[serde(default = "default_design")]
    pub design: String,
    #[serde(default)]
    pub parameters: serde_json::Value,
    #[serde(default)]
    pub data: BTreeMap<String, DataSource>,
    #[serde(default)]
    pub ordinal: Option<Ordinal>,
    #[serde(default)]
    pub prep: Vec<PrepStep>,
    /// Labels fixed at a value before fitting.
    #[serde(default)]
    pub fix: BTreeMap<String, f64>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub simulate: Option<SimConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_name() -> String {
    "model".into()
}

fn default_design() -> String {
    "paths".into()
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum DataSource {
    File(PathBuf),
    Subset {
        file: PathBuf,
        column: String,
        values: Vec<String>,
    },
}

/// Inline level declarations or a sidecar file holding them.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum Ordinal {
    Inline(BTreeMap<String, Vec<String>>),
    File(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PrepStep {
    BinCont {
        vars: Vec<String>,
        censp: f64,
        suffixes: Option<Vec<String>>,
    },
    Placeholder {
        covariate: String,
        phenotype: String,
        suffixes: [String; 2],
    },
    Residualize {
        formula: Option<String>,
        #[serde(default)]
        dvs: Vec<String>,
        #[serde(default)]
        covs: Vec<String>,
        suffixes: Option<Vec<String>>,
    },
    Scale {
        bases: Vec<String>,
        suffixes: Vec<String>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default = "d_grad_tol")]
    pub grad_tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_multistarts")]
    pub multistarts: usize,
    #[serde(default = "d_true")]
    pub standard_errors: bool,
}

fn d_max_iter() -> usize {
    FitOptions::default().max_iter
}
fn d_grad_tol() -> f64 {
    FitOptions::default().grad_tol
}
fn d_multistarts() -> usize {
    FitOptions::default().multistarts
}
fn d_true() -> bool {
    true
}

impl Default for FitConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl FitConfig {
    pub fn options(&self, seed: Option<u64>) -> FitOptions {
        FitOptions {
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
            seed: seed.unwrap_or(self.seed),
            multistarts: self.multistarts,
            standard_errors: self.standard_errors,
            ..FitOptions::default()
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Prepended to every output file name.
    #[serde(default)]
    pub prefix: String,
    pub report: Option<ReportFormat>,
    /// Wald 95% limits in the estimates table.
    #[serde(default)]
    pub ci: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: NPerGroup,
    #[serde(default)]
    pub truth: BTreeMap<String, f64>,
    pub seed: Option<u64>,
    /// Manifest -> cut points; the simulated column becomes ordinal.
    #[serde(default)]
    pub ordinal: BTreeMap<String, Vec<f64>>,
    pub censor: Option<CensorConfig>,
    pub missing: Option<MissingConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum NPerGroup {
    Same(usize),
    Each(Vec<usize>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensorConfig {
    pub vars: Vec<String>,
    pub lod: f64,
    pub suffixes: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingConfig {
    pub columns: Vec<String>,
    pub rate: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| fail(Kind::Input, format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| fail(Kind::Config, format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn ordinal_levels(&self) -> Result<BTreeMap<String, Vec<String>>, CliError> {
        match &self.ordinal {
            None => Ok(BTreeMap::new()),
            Some(Ordinal::Inline(m)) => Ok(m.clone()),
            Some(Ordinal::File(p)) => read_levels(&self.resolve(p)),
        }
    }

    /// Reads every group's data, in `data` key order.
    pub fn load_groups(&self) -> Result<Vec<(String, ColumnTable)>, CliError> {
        let levels = self.ordinal_levels()?;
        let mut out = Vec::new();
        for (group, src) in &self.data {
            let table = match src {
                DataSource::File(p) => read_table(&self.resolve(p), &levels)?,
                DataSource::Subset { file, column, values } => read_table(&self.resolve(file), &levels)?
                    .filter_rows(column, values)
                    .map_err(|e| fail(Kind::Input, format!("group {group}: {e}")))?,
            };
            out.push((group.clone(), table));
        }
        Ok(out)
    }
}

pub fn read_levels(path: &Path) -> Result<BTreeMap<String, Vec<String>>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(Kind::Input, format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| fail(Kind::Config, format!("{}: {e}", path.display())))
}

/// Only ordinal columns actually present in this file are declared to the reader.
pub fn read_table(path: &Path, levels: &BTreeMap<String, Vec<String>>) -> Result<ColumnTable, CliError> {
    let header = std::fs::File::open(path)
        .map_err(|e| fail(Kind::Input, format!("cannot open {}: {e}", path.display())))
        .and_then(|f| {
            let mut line = String::new();
            std::io::BufRead::read_line(&mut std::io::BufReader::new(f), &mut line)
                .map_err(|e| fail(Kind::Input, format!("{}: {e}", path.display())))?;
            Ok(line)
        })?;
    let names: Vec<&str> = header.trim_end().split(',').map(|s| s.trim().trim_matches('"')).collect();
    let here: BTreeMap<String, Vec<String>> =
        levels.iter().filter(|(k, _)| names.contains(&k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect();
    ColumnTable::read_csv_path(path, &here).map_err(|e| fail(Kind::Input, format!("{}: {e}", path.display())))
}

/// Applies the steps in order; returns the table plus warnings.
pub fn apply_prep(mut data: ColumnTable, steps: &[PrepStep]) -> Result<(ColumnTable, Vec<String>), CliError> {
    let mut notes = Vec::new();
    for step in steps {
        data = match step {
            PrepStep::BinCont { vars, censp, suffixes } => make_bin_cont_pair(&data, vars, *censp, suffixes.as_deref())?,
            PrepStep::Placeholder { covariate, phenotype, suffixes } => {
                let out = update_covariate_placeholders(&data, covariate, phenotype, suffixes)?;
                for w in validate_placeholders(&out, covariate, phenotype, suffixes)? {
                    notes.push(format!(
                        "row {}: twin {} has placeholder {} with observed {}",
                        w.row + 1,
                        w.twin,
                        w.covariate,
                        w.phenotype
                    ));
                }
                out
            }
            PrepStep::Residualize { formula, dvs, covs, suffixes } => {
                let spec = match formula {
                    Some(f) => ResidualSpec::Formula(parse_formula(f)?),
                    None => ResidualSpec::Columns { dvs: dvs.clone(), covs: covs.clone() },
                };
                let r = residualize(&data, &spec, suffixes.as_deref())?;
                notes.extend(r.warnings);
                r.data
            }
            PrepStep::Scale { bases, suffixes } => scale_wide_twin(&data, bases, suffixes)?,
        };
    }
    Ok((data, notes))
}

impl From<twinsem::Error> for CliError {
    fn from(e: twinsem::Error) -> Self {
        use twinsem::Error as E;
        let kind = match &e {
            E::Data(_) | E::Io(_) | E::Csv(_) | E::MissingDefinitionValue(_) => Kind::Input,
            E::Schema(_) | E::Parse { .. } | E::Json(_) => Kind::Config,
            _ => Kind::Model,
        };
        fail(kind, e.to_string())
    }
}
