//! Twin-pair expansion of a single-person path set, and the Cholesky ACE model.

use crate::builders::{mean_var, ordinal_levels, require_columns, twin_column, wire_ordinal};
use crate::data::ColumnTable;
use crate::error::{Error, Result};
use crate::model::{Group, GroupedModel};
use crate::ram::{auto_label, def_column, def_name, PathSpec, RamModel, ONE};

#[derive(Debug, Clone, PartialEq)]
pub struct TwinOptions {
    pub sep: String,
    pub dz_ar: f64,
    pub dz_cr: f64,
}

impl Default for TwinOptions {
    fn default() -> Self {
        Self {
            sep: "_T".into(),
            dz_ar: 0.5,
            dz_cr: 1.0,
        }
    }
}

impl TwinOptions {
    pub(crate) fn validate(&self) -> Result<()> {
        for (name, v) in [("dzAr", self.dz_ar), ("dzCr", self.dz_cr)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Model(format!("{name} = {v} must lie in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// `a3` -> Some('a'), `e12` -> Some('e'), anything else -> None.
fn component(latent: &str) -> Option<char> {
    let mut chars = latent.chars();
    let head = chars.next()?;
    let rest = chars.as_str();
    (matches!(head, 'a' | 'c' | 'e') && !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
        .then_some(head)
}

fn mentioned(paths: &[PathSpec]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for p in paths.iter().filter(|p| !p.defn) {
        for v in [&p.from, &p.to] {
            if v != ONE && def_column(v).is_none() && !out.contains(v) {
                out.push(v.clone());
            }
        }
    }
    out
}

/// [`twin_maker`] without data: `manifests` names the measured one-person variables.
pub fn twin_model(name: &str, paths: &[PathSpec], manifests: &[String], opts: &TwinOptions) -> Result<GroupedModel> {
    twin_expand(name, paths, manifests, opts, None)
}

/// Expands a one-person path set to twin pairs for MZ and DZ groups.
///
/// Variables with `<v><sep>1` and `<v><sep>2` columns in the data are manifests; the rest are
/// latents. Latents named a1, a2, ... get cross-twin covariances of 1 (MZ) or dzAr (DZ), c1, ...
/// get 1 or dzCr, e-latents none. Labels are kept, so parameters are equal across twins and groups;
/// unlabelled free paths are labelled from the unsuffixed names.
pub fn twin_maker(
    name: &str,
    paths: &[PathSpec],
    mz: ColumnTable,
    dz: ColumnTable,
    opts: &TwinOptions,
) -> Result<GroupedModel> {
    let is_manifest = |v: &str| {
        (1..=2).all(|t| mz.has(&twin_column(v, &opts.sep, t)) || dz.has(&twin_column(v, &opts.sep, t)))
    };
    let manifests: Vec<String> = mentioned(paths).into_iter().filter(|v| is_manifest(v)).collect();
    if manifests.is_empty() {
        return Err(Error::Data(format!(
            "no path variable has `{}1`/`{}2` columns in the data",
            opts.sep, opts.sep
        )));
    }
    let mut model = twin_expand(name, paths, &manifests, opts, Some((&mz, &dz)))?;
    bind_twin_groups(&mut model, &manifests, &opts.sep, [mz, dz])?;
    Ok(model)
}

/// Checks columns, wires ordinal thresholds (stem = base name) and attaches data to the MZ and DZ groups.
pub(crate) fn bind_twin_groups(
    model: &mut GroupedModel,
    manifests: &[String],
    sep: &str,
    tables: [ColumnTable; 2],
) -> Result<()> {
    let mut columns = Vec::new();
    for m in manifests {
        for t in 1..=2 {
            columns.push(twin_column(m, sep, t));
        }
    }
    for (group, data) in model.groups.iter_mut().zip(tables) {
        require_columns(&data, &group.name, &columns)?;
        for m in manifests {
            for t in 1..=2 {
                wire_ordinal(group, &data, &twin_column(m, sep, t), m)?;
            }
        }
        group.data = Some(data);
    }
    Ok(())
}

/// Twin expansion without data. Definition columns resolve to the twin-suffixed column when
/// the group's table has it, otherwise to the shared column.
pub(crate) fn twin_expand(
    name: &str,
    paths: &[PathSpec],
    manifests: &[String],
    opts: &TwinOptions,
    data: Option<(&ColumnTable, &ColumnTable)>,
) -> Result<GroupedModel> {
    opts.validate()?;
    let latents: Vec<String> = mentioned(paths)
        .into_iter()
        .filter(|v| !manifests.contains(v))
        .collect();
    let comps: Vec<(String, char)> = latents
        .iter()
        .filter_map(|l| component(l).map(|c| (l.clone(), c)))
        .collect();
    if !comps.iter().any(|(_, c)| *c == 'a' || *c == 'c') {
        return Err(Error::Model(
            "nothing to constrain: no latents named a1, a2, ... or c1, c2, ...".into(),
        ));
    }
    let mut paths = paths.to_vec();
    for (l, _) in &comps {
        match paths.iter().find(|p| !p.defn && p.arrows == 2 && &p.from == l && &p.to == l) {
            Some(p) if p.free || p.value.unwrap_or(1.0) != 1.0 => {
                return Err(Error::Model(format!(
                    "variance-component latent `{l}` must have its variance fixed at 1"
                )))
            }
            Some(_) => {}
            None => paths.push(PathSpec::variance(l).fixed(1.0)),
        }
    }
    let empty = ColumnTable::new();
    let (mzd, dzd) = data.unwrap_or((&empty, &empty));
    let mut model = GroupedModel::new(name);
    for (gname, d, ra, rc) in [("MZ", mzd, 1.0, 1.0), ("DZ", dzd, opts.dz_ar, opts.dz_cr)] {
        let ram = twin_group(gname, &paths, manifests, &latents, &comps, ra, rc, &opts.sep, d)?;
        model.push(Group::new(gname, ram))?;
    }
    Ok(model)
}

#[allow(clippy::too_many_arguments)]
fn twin_group(
    gname: &str,
    paths: &[PathSpec],
    manifests: &[String],
    latents: &[String],
    comps: &[(String, char)],
    ra: f64,
    rc: f64,
    sep: &str,
    data: &ColumnTable,
) -> Result<RamModel> {
    let per_twin = |vs: &[String]| -> Vec<String> {
        (1..=2)
            .flat_map(|t| vs.iter().map(move |v| twin_column(v, sep, t)))
            .collect()
    };
    let mut ram = RamModel::new(gname, &per_twin(manifests), &per_twin(latents))?;
    let def_col = |col: &str, t: usize| {
        let s = twin_column(col, sep, t);
        if data.has(&s) {
            s
        } else {
            col.to_string()
        }
    };
    let map = |v: &str, t: usize| -> String {
        if v == ONE {
            v.to_string()
        } else if let Some(col) = def_column(v) {
            def_name(&def_col(col, t))
        } else {
            twin_column(v, sep, t)
        }
    };
    for t in 1..=2 {
        for p in paths {
            if p.defn {
                ram.add_path(&PathSpec::defn(&def_col(&p.from, t)))?;
                continue;
            }
            let label = match &p.label {
                Some(l) if def_column(l).is_some() => Some(map(l, t)),
                Some(l) => Some(l.clone()),
                None if p.free => Some(auto_label(&p.from, &p.to, p.arrows)),
                None => None,
            };
            ram.add_path(&PathSpec {
                from: map(&p.from, t),
                to: map(&p.to, t),
                label,
                ..p.clone()
            })?;
        }
    }
    for (l, c) in comps {
        let r = match c {
            'a' => ra,
            'c' => rc,
            _ => continue,
        };
        ram.add_path(
            &PathSpec::two_headed(&twin_column(l, sep, 1), &twin_column(l, sep, 2)).fixed(r),
        )?;
    }
    Ok(ram)
}

/// Cholesky ACE paths over `sel_dvs`: latents a_k, c_k, e_k with unit variance and
/// lower-triangular loadings labelled `a_r<i>c<j>`; means labelled `mean_<v>`.
/// Ordinal variables get a mean fixed at 0 and `e_r<i>c<i>` fixed at 1.
pub fn ace_paths(sel_dvs: &[String], sd: &[f64], mean: &[f64], ordinal: &[bool]) -> Vec<PathSpec> {
    let nv = sel_dvs.len();
    let mut out = Vec::new();
    for comp in ['a', 'c', 'e'] {
        for j in 0..nv {
            let latent = format!("{comp}{}", j + 1);
            for (i, var) in sel_dvs.iter().enumerate().skip(j) {
                let label = format!("{comp}_r{}c{}", i + 1, j + 1);
                let start = if i == j { sd[i] / 3f64.sqrt() } else { 0.05 * sd[i] };
                let p = PathSpec::one_headed(&latent, var).label(&label);
                out.push(if comp == 'e' && i == j && ordinal[i] {
                    p.fixed(1.0)
                } else {
                    p.start(start)
                });
            }
            out.push(PathSpec::variance(&latent).fixed(1.0));
        }
    }
    for (i, var) in sel_dvs.iter().enumerate() {
        let p = PathSpec::mean(var).label(&format!("mean_{var}"));
        out.push(if ordinal[i] { p.fixed(0.0) } else { p.start(mean[i]) });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AceSpec {
    pub name: String,
    pub sel_dvs: Vec<String>,
    pub opts: TwinOptions,
}

/// Pooled mean and SD of each variable over both twins and both groups.
pub(crate) fn pooled_moments(bases: &[String], sep: &str, tables: &[&ColumnTable]) -> (Vec<f64>, Vec<f64>) {
    let mut means = Vec::new();
    let mut sds = Vec::new();
    for b in bases {
        let mut xs = Vec::new();
        for t in tables {
            for k in 1..=2 {
                if let Ok(c) = t.continuous(&twin_column(b, sep, k)) {
                    xs.extend_from_slice(c);
                }
            }
        }
        let (m, v) = mean_var(&xs).unwrap_or((0.0, 1.0));
        means.push(m);
        sds.push(if v > 0.0 { v.sqrt() } else { 1.0 });
    }
    (means, sds)
}

impl AceSpec {
    fn check(&self) -> Result<()> {
        if self.sel_dvs.is_empty() {
            return Err(Error::Model("no phenotypes selected".into()));
        }
        Ok(())
    }

    /// The model without data, with unit starting SDs and zero means.
    pub fn model(&self) -> Result<GroupedModel> {
        self.check()?;
        let nv = self.sel_dvs.len();
        let paths = ace_paths(&self.sel_dvs, &vec![1.0; nv], &vec![0.0; nv], &vec![false; nv]);
        twin_expand(&self.name, &paths, &self.sel_dvs, &self.opts, None)
    }
}

/// Cholesky ACE model for MZ and DZ groups.
pub fn build_ace(spec: &AceSpec, mz: ColumnTable, dz: ColumnTable) -> Result<GroupedModel> {
    spec.check()?;
    let (mean, sd) = pooled_moments(&spec.sel_dvs, &spec.opts.sep, &[&mz, &dz]);
    let ordinal: Vec<bool> = spec
        .sel_dvs
        .iter()
        .map(|v| ordinal_levels(&mz, &twin_column(v, &spec.opts.sep, 1)).is_some())
        .collect();
    let paths = ace_paths(&spec.sel_dvs, &sd, &mean, &ordinal);
    let mut model = twin_expand(&spec.name, &paths, &spec.sel_dvs, &spec.opts, Some((&mz, &dz)))?;
    bind_twin_groups(&mut model, &spec.sel_dvs, &spec.opts.sep, [mz, dz])?;
    Ok(model)
}
