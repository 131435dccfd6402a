//! Turns a run configuration into a grouped model, with or without data.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use twinsem::builders::{
    build_ace, build_clpm, build_mrdoc, build_sexlim, icu_model, twin_maker, twin_model, AceSpec, ClpmSpec,
    ClpmVariant, MrDocSpec, MrDocVariant, SexLimSpec, TwinOptions, SEXLIM_GROUPS,
};
use twinsem::{parse_exchange, parse_exchange_str, parse_onyx_export, ColumnTable, Group, GroupedModel, ParsedPathSet};

use crate::config::RunConfig;
use crate::fail::{fail, CliError, Kind};

/// Twin options, also flattened into the larger parameter objects.
#[derive(Debug, Deserialize)]
struct TwinParams {
    #[serde(default = "sep")]
    sep: String,
    #[serde(default = "half", alias = "dzAr")]
    dz_ar: f64,
    #[serde(default = "one", alias = "dzCr")]
    dz_cr: f64,
}

fn sep() -> String {
    "_T".into()
}
fn half() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}

impl TwinParams {
    fn options(&self) -> TwinOptions {
        TwinOptions {
            sep: self.sep.clone(),
            dz_ar: self.dz_ar,
            dz_cr: self.dz_cr,
        }
    }
}

#[derive(Debug, Deserialize)]
struct AceParams {
    #[serde(alias = "selDVs")]
    sel_dvs: Vec<String>,
    #[serde(flatten)]
    twin: TwinParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClpmParams {
    waves: usize,
    #[serde(default = "x")]
    x: String,
    #[serde(default = "y")]
    y: String,
    /// Heise1970 / Hamaker2015 style names, overriding the design's default variant.
    model: Option<String>,
    #[serde(default)]
    equal_innovations: bool,
}

fn x() -> String {
    "x".into()
}
fn y() -> String {
    "y".into()
}

#[derive(Debug, Deserialize)]
struct MrDocParams {
    exposure: String,
    outcome: String,
    #[serde(default)]
    prs: Vec<String>,
    #[serde(default)]
    sibling: bool,
    #[serde(flatten)]
    twin: TwinParams,
}

#[derive(Debug, Deserialize)]
struct SexLimParams {
    #[serde(alias = "selDVs")]
    sel_dvs: Vec<String>,
    #[serde(alias = "A_or_C", default = "a_component")]
    a_or_c: String,
    #[serde(default = "nonscalar")]
    variant: String,
    #[serde(flatten)]
    twin: TwinParams,
}

fn a_component() -> String {
    "A".into()
}
fn nonscalar() -> String {
    "Nonscalar".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IcuParams {
    var: String,
    censp: f64,
}

fn params<T: DeserializeOwned>(cfg: &RunConfig) -> Result<T, CliError> {
    let v = if cfg.parameters.is_null() {
        serde_json::json!({})
    } else {
        cfg.parameters.clone()
    };
    serde_json::from_value(v).map_err(|e| fail(Kind::Config, format!("parameters for design `{}`: {e}", cfg.design)))
}

/// Paths from `paths_override`, else `paths_file`, else the inline exchange fields.
pub fn path_set(cfg: &RunConfig, paths_override: Option<&Path>) -> Result<ParsedPathSet, CliError> {
    let file = paths_override.map(Path::to_path_buf).or_else(|| cfg.paths_file.as_ref().map(|p| cfg.resolve(p)));
    let set = match file {
        Some(p) => read_paths(&p)?,
        None => {
            if cfg.paths.is_empty() {
                return Err(fail(Kind::Config, format!("design `{}` needs `paths` or `paths_file`", cfg.design)));
            }
            let doc = serde_json::json!({
                "name": cfg.name,
                "manifests": cfg.manifests,
                "latents": cfg.latents,
                "defvars": cfg.defvars,
                "paths": cfg.paths,
            });
            parse_exchange(&doc)?
        }
    };
    for d in &set.diagnostics {
        eprintln!("warning: line {}: {}", d.line, d.message);
    }
    Ok(set)
}

/// Onyx exports by `.R`/`.onyx` extension, exchange JSON by `.json`.
pub fn read_paths(path: &Path) -> Result<ParsedPathSet, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| fail(Kind::Input, format!("cannot read {}: {e}", path.display())))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let parsed = match ext.as_str() {
        "r" | "onyx" => parse_onyx_export(&text),
        "json" => parse_exchange_str(&text),
        _ => return Err(fail(Kind::Config, format!("{}: expected a .R, .onyx or .json file", path.display()))),
    };
    parsed.map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

fn take(groups: &mut BTreeMap<String, ColumnTable>, name: &str, design: &str) -> Result<ColumnTable, CliError> {
    groups
        .remove(name)
        .ok_or_else(|| fail(Kind::Config, format!("design `{design}` needs a `{name}` entry under `data`")))
}

fn single(groups: BTreeMap<String, ColumnTable>, design: &str) -> Result<ColumnTable, CliError> {
    if groups.len() != 1 {
        return Err(fail(Kind::Config, format!("design `{design}` takes exactly one dataset, got {}", groups.len())));
    }
    Ok(groups.into_values().next().expect("one group"))
}

fn clpm_spec(cfg: &RunConfig) -> Result<ClpmSpec, CliError> {
    let p: ClpmParams = params(cfg)?;
    let default = if cfg.design == "riclpm" { "riclpm" } else { "clpm" };
    let variant: ClpmVariant = p.model.as_deref().unwrap_or(default).parse()?;
    let name = p.model.clone().unwrap_or_else(|| cfg.name.clone());
    let mut spec = ClpmSpec::new(&name, p.waves, variant, &p.x, &p.y);
    spec.equal_innovations = p.equal_innovations;
    Ok(spec)
}

fn mrdoc_spec(cfg: &RunConfig) -> Result<MrDocSpec, CliError> {
    let p: MrDocParams = params(cfg)?;
    let variant: MrDocVariant = cfg.design.parse()?;
    let prs: Vec<&str> = p.prs.iter().map(String::as_str).collect();
    let mut spec = MrDocSpec::new(&cfg.name, &p.exposure, &p.outcome, &prs, variant);
    spec.sibling = p.sibling;
    spec.opts = p.twin.options();
    Ok(spec)
}

fn sexlim_spec(cfg: &RunConfig) -> Result<SexLimSpec, CliError> {
    let p: SexLimParams = params(cfg)?;
    let dvs: Vec<&str> = p.sel_dvs.iter().map(String::as_str).collect();
    let mut spec = SexLimSpec::new(&cfg.name, &dvs, p.a_or_c.parse()?, p.variant.parse()?);
    spec.sep = p.twin.sep;
    spec.dz_ar = p.twin.dz_ar;
    spec.dz_cr = p.twin.dz_cr;
    Ok(spec)
}

fn ace_spec(cfg: &RunConfig) -> Result<AceSpec, CliError> {
    let p: AceParams = params(cfg)?;
    Ok(AceSpec {
        name: cfg.name.clone(),
        sel_dvs: p.sel_dvs,
        opts: p.twin.options(),
    })
}

/// The fitted model with each group's data bound.
pub fn build(
    cfg: &RunConfig,
    mut groups: BTreeMap<String, ColumnTable>,
    paths_override: Option<&Path>,
) -> Result<GroupedModel, CliError> {
    let d = cfg.design.as_str();
    let model = match d {
        "paths" => {
            let set = path_set(cfg, paths_override)?;
            let ram = set.to_model(&cfg.name, (!cfg.manifests.is_empty()).then_some(cfg.manifests.as_slice()))?;
            if groups.is_empty() {
                return Err(fail(Kind::Config, "no datasets under `data`"));
            }
            let mut m = GroupedModel::new(&cfg.name);
            for (name, table) in groups {
                let mut r = ram.clone();
                r.name = name.clone();
                m.push(Group::new(&name, r).with_data(table))?;
            }
            m
        }
        "twin" => {
            let set = path_set(cfg, paths_override)?;
            let p: TwinParams = params(cfg)?;
            let mz = take(&mut groups, "MZ", d)?;
            let dz = take(&mut groups, "DZ", d)?;
            twin_maker(&cfg.name, &set.paths, mz, dz, &p.options())?
        }
        "ace" => {
            let spec = ace_spec(cfg)?;
            let mz = take(&mut groups, "MZ", d)?;
            let dz = take(&mut groups, "DZ", d)?;
            build_ace(&spec, mz, dz)?
        }
        "clpm" | "riclpm" => build_clpm(&clpm_spec(cfg)?, single(groups, d)?)?,
        "doc" | "mrdoc" | "mrdoc2" => {
            let spec = mrdoc_spec(cfg)?;
            if spec.sibling {
                build_mrdoc(&spec, take(&mut groups, "SIB", d)?, None)?
            } else {
                let mz = take(&mut groups, "MZ", d)?;
                let dz = take(&mut groups, "DZ", d)?;
                build_mrdoc(&spec, mz, Some(dz))?
            }
        }
        "sexlim" => {
            let spec = sexlim_spec(cfg)?;
            for g in groups.keys() {
                if !SEXLIM_GROUPS.contains(&g.as_str()) {
                    return Err(fail(Kind::Config, format!("unknown sex-limitation group `{g}`; expected {SEXLIM_GROUPS:?}")));
                }
            }
            build_sexlim(&spec, groups)?
        }
        "icu" => {
            let p: IcuParams = params(cfg)?;
            icu_model(&cfg.name, &p.var, p.censp, single(groups, d)?)?
        }
        other => return Err(unknown_design(other)),
    };
    fix(model, cfg)
}

/// The model without data, for simulation. `paths` designs produce one group per `data` key
/// (or a single `data` group); `twin` designs need declared one-person manifests.
pub fn build_unbound(cfg: &RunConfig, paths_override: Option<&Path>) -> Result<GroupedModel, CliError> {
    let d = cfg.design.as_str();
    let model = match d {
        "paths" => {
            let set = path_set(cfg, paths_override)?;
            let ram = set.to_model(&cfg.name, (!cfg.manifests.is_empty()).then_some(cfg.manifests.as_slice()))?;
            let names: Vec<String> = if cfg.data.is_empty() {
                vec!["data".into()]
            } else {
                cfg.data.keys().cloned().collect()
            };
            let mut m = GroupedModel::new(&cfg.name);
            for name in names {
                let mut r = ram.clone();
                r.name = name.clone();
                m.push(Group::new(&name, r))?;
            }
            m
        }
        "twin" => {
            let set = path_set(cfg, paths_override)?;
            let p: TwinParams = params(cfg)?;
            let manifests = if set.declared_manifests.is_empty() {
                cfg.manifests.clone()
            } else {
                set.declared_manifests.clone()
            };
            if manifests.is_empty() {
                return Err(fail(Kind::Config, "design `twin` needs declared manifests to simulate"));
            }
            twin_model(&cfg.name, &set.paths, &manifests, &p.options())?
        }
        "ace" => ace_spec(cfg)?.model()?,
        "clpm" | "riclpm" => clpm_spec(cfg)?.model()?,
        "doc" | "mrdoc" | "mrdoc2" => mrdoc_spec(cfg)?.model()?,
        "sexlim" => sexlim_spec(cfg)?.model()?,
        "icu" => return Err(fail(Kind::Config, "design `icu` is fitted to censored data; simulate the uncensored measure with design `paths` and a `censor` block")),
        other => return Err(unknown_design(other)),
    };
    fix(model, cfg)
}

fn unknown_design(d: &str) -> CliError {
    fail(
        Kind::Config,
        format!("unknown design `{d}`; expected paths, twin, ace, clpm, riclpm, doc, mrdoc, mrdoc2, sexlim or icu"),
    )
}

fn fix(mut model: GroupedModel, cfg: &RunConfig) -> Result<GroupedModel, CliError> {
    for (label, value) in &cfg.fix {
        if model.fix_parameter(label, *value) == 0 {
            return Err(fail(Kind::Config, format!("`fix` names unknown label `{label}`")));
        }
    }
    Ok(model)
}
