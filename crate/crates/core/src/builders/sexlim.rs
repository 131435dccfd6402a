//! Five-group sex-limitation twin models in the correlated-factors form.
//!
//! Each component (A, C, E) has one unit-variance factor per phenotype, correlated within
//! person through an R matrix, with factor-to-phenotype magnitudes. A cross-twin correlation
//! `r` on a factor block is realised as `K_t = √r·G + √(1 − r)·U_t`, where `G` is shared by the
//! pair and `U_t` is private to twin t; G and U carry the same R, so cov(K_1, K_2) = r·R.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::builders::twin::pooled_moments;
use crate::builders::{ordinal_levels, require_columns, twin_column, wire_ordinal};
use crate::data::ColumnTable;
use crate::error::{Error, Result};
use crate::model::{Group, GroupedModel};
use crate::ram::{PathSpec, RamModel};

pub const SEXLIM_GROUPS: [&str; 5] = ["MZM", "DZM", "MZF", "DZF", "DZO"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SexLimVariant {
    Homogeneity,
    Scalar,
    Nonscalar,
}

impl FromStr for SexLimVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "homogeneity" => Ok(Self::Homogeneity),
            "scalar" => Ok(Self::Scalar),
            "nonscalar" => Ok(Self::Nonscalar),
            _ => Err(Error::Model(format!("unknown sex-limitation variant `{s}`"))),
        }
    }
}

/// Component allowed a qualitative (cross-sex) difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Qualitative {
    A,
    C,
}

impl FromStr for Qualitative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Self::A),
            "C" | "c" => Ok(Self::C),
            _ => Err(Error::Model(format!("A_or_C must be \"A\" or \"C\", got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SexLimSpec {
    pub name: String,
    pub sel_dvs: Vec<String>,
    pub sep: String,
    pub a_or_c: Qualitative,
    pub variant: SexLimVariant,
    pub dz_ar: f64,
    pub dz_cr: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sex {
    M,
    F,
}

impl Sex {
    fn tag(self) -> &'static str {
        match self {
            Sex::M => "m",
            Sex::F => "f",
        }
    }
}

fn group_layout(name: &str) -> (bool, Sex, Sex) {
    match name {
        "MZM" => (true, Sex::M, Sex::M),
        "DZM" => (false, Sex::M, Sex::M),
        "MZF" => (true, Sex::F, Sex::F),
        "DZF" => (false, Sex::F, Sex::F),
        _ => (false, Sex::M, Sex::F),
    }
}

struct Starts {
    mean: [Vec<f64>; 2],
    sd: [Vec<f64>; 2],
    ordinal: Vec<bool>,
}

impl SexLimSpec {
    pub fn new(name: &str, sel_dvs: &[&str], a_or_c: Qualitative, variant: SexLimVariant) -> Self {
        Self {
            name: name.into(),
            sel_dvs: sel_dvs.iter().map(|s| s.to_string()).collect(),
            sep: "_T".into(),
            a_or_c,
            variant,
            dz_ar: 0.5,
            dz_cr: 1.0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.sel_dvs.is_empty() {
            return Err(Error::Model("no phenotypes selected".into()));
        }
        crate::builders::TwinOptions {
            sep: self.sep.clone(),
            dz_ar: self.dz_ar,
            dz_cr: self.dz_cr,
        }
        .validate()
    }

    fn chosen(&self) -> char {
        match self.a_or_c {
            Qualitative::A => 'a',
            Qualitative::C => 'c',
        }
    }

    fn sex_specific_r(&self, c: char) -> bool {
        self.variant == SexLimVariant::Nonscalar && (c == 'e' || c == self.chosen())
    }

    fn magnitude(&self, c: char, sex: Sex, v: &str) -> String {
        match self.variant {
            SexLimVariant::Homogeneity => format!("{c}_{v}"),
            _ => format!("{c}_{}_{v}", sex.tag()),
        }
    }

    fn correlation(&self, c: char, sex: Sex, i: usize, j: usize) -> String {
        let (vi, vj) = (&self.sel_dvs[i], &self.sel_dvs[j]);
        if self.sex_specific_r(c) {
            format!("r{c}_{}_{vi}_{vj}", sex.tag())
        } else {
            format!("r{c}_{vi}_{vj}")
        }
    }

    /// Labels that are correlations, for bounding to [-1, 1].
    fn correlation_labels(&self) -> Vec<String> {
        let nv = self.sel_dvs.len();
        let mut out = Vec::new();
        for c in ['a', 'c', 'e'] {
            for sex in [Sex::M, Sex::F] {
                for i in 0..nv {
                    for j in 0..i {
                        let l = self.correlation(c, sex, i, j);
                        if !out.contains(&l) {
                            out.push(l);
                        }
                    }
                }
            }
        }
        if self.variant == SexLimVariant::Nonscalar {
            for i in 0..nv {
                for j in 0..nv {
                    out.push(self.cross_sex(i, j));
                }
            }
        }
        out
    }

    fn cross_sex(&self, i: usize, j: usize) -> String {
        format!("r{}o_{}_{}", self.chosen(), self.sel_dvs[i], self.sel_dvs[j])
    }

    pub fn model(&self) -> Result<GroupedModel> {
        self.check()?;
        let nv = self.sel_dvs.len();
        self.assemble(&Starts {
            mean: [vec![0.0; nv], vec![0.0; nv]],
            sd: [vec![1.0; nv], vec![1.0; nv]],
            ordinal: vec![false; nv],
        })
    }

    fn assemble(&self, st: &Starts) -> Result<GroupedModel> {
        let mut model = GroupedModel::new(&self.name);
        for g in SEXLIM_GROUPS {
            model.push(Group::new(g, self.group_model(g, st)?))?;
        }
        for l in self.correlation_labels() {
            model.set_bound(&l, -1.0, 1.0);
        }
        Ok(model)
    }

    fn group_model(&self, g: &str, st: &Starts) -> Result<RamModel> {
        let (mz, s1, s2) = group_layout(g);
        let sexes = [s1, s2];
        let sep = &self.sep;
        let nv = self.sel_dvs.len();
        let pheno = |i: usize, t: usize| twin_column(&self.sel_dvs[i], sep, t);
        let manifests: Vec<String> = (1..=2).flat_map(|t| (0..nv).map(move |i| pheno(i, t))).collect();
        let mut ram = RamModel::new(g, &manifests, &Vec::<String>::new())?;
        let sqrt3 = 3f64.sqrt();
        for c in ['a', 'c', 'e'] {
            let up = c.to_ascii_uppercase();
            let r = match (c, mz) {
                ('e', _) => 0.0,
                (_, true) => 1.0,
                ('a', false) => self.dz_ar,
                _ => self.dz_cr,
            };
            let split = c != 'e' && self.sex_specific_r(c) && s1 != s2;
            // factor block: names and the sex whose R it carries
            let block = |ram: &mut RamModel, names: &[String], sex: Sex| -> Result<()> {
                for n in names {
                    ram.add_latent(n)?;
                    ram.add_path(&PathSpec::variance(n).fixed(1.0))?;
                }
                for i in 0..nv {
                    for j in 0..i {
                        ram.add_path(
                            &PathSpec::two_headed(&names[i], &names[j]).label(&self.correlation(c, sex, i, j)).start(0.0),
                        )?;
                    }
                }
                Ok(())
            };
            let named = |stem: &str, t: Option<usize>| -> Vec<String> {
                self.sel_dvs
                    .iter()
                    .map(|v| match t {
                        Some(t) => twin_column(&format!("{up}{stem}_{v}"), sep, t),
                        None => format!("{up}{stem}_{v}"),
                    })
                    .collect()
            };
            // G: shared by the pair (or one per twin when cross-sex correlations are free)
            let g_names: [Vec<String>; 2] = if r > 0.0 {
                if split {
                    let (g1, g2) = (named("G", Some(1)), named("G", Some(2)));
                    block(&mut ram, &g1, s1)?;
                    block(&mut ram, &g2, s2)?;
                    for i in 0..nv {
                        for j in 0..nv {
                            ram.add_path(&PathSpec::two_headed(&g1[i], &g2[j]).label(&self.cross_sex(i, j)).start(0.0))?;
                        }
                    }
                    [g1, g2]
                } else {
                    let shared = named("G", None);
                    block(&mut ram, &shared, s1)?;
                    [shared.clone(), shared]
                }
            } else {
                [Vec::new(), Vec::new()]
            };
            for (t, sex) in (1..=2).zip(sexes) {
                let source: Vec<String> = if r >= 1.0 {
                    g_names[t - 1].clone()
                } else {
                    let u = named("U", Some(t));
                    block(&mut ram, &u, sex)?;
                    if r <= 0.0 {
                        u
                    } else {
                        let k = named("K", Some(t));
                        for i in 0..nv {
                            ram.add_latent(&k[i])?;
                            ram.add_path(&PathSpec::one_headed(&g_names[t - 1][i], &k[i]).fixed(r.sqrt()))?;
                            ram.add_path(&PathSpec::one_headed(&u[i], &k[i]).fixed((1.0 - r).sqrt()))?;
                        }
                        k
                    }
                };
                let si = if sex == Sex::M { 0 } else { 1 };
                for i in 0..nv {
                    let p = PathSpec::one_headed(&source[i], &pheno(i, t)).label(&self.magnitude(c, sex, &self.sel_dvs[i]));
                    ram.add_path(&if c == 'e' && st.ordinal[i] {
                        p.fixed(1.0)
                    } else {
                        p.start(st.sd[si][i] / sqrt3)
                    })?;
                }
            }
        }
        for (t, sex) in (1..=2).zip(sexes) {
            let si = if sex == Sex::M { 0 } else { 1 };
            for i in 0..nv {
                let m = PathSpec::mean(&pheno(i, t)).label(&format!("mean_{}_{}", sex.tag(), self.sel_dvs[i]));
                ram.add_path(&if st.ordinal[i] { m.fixed(0.0) } else { m.start(st.mean[si][i]) })?;
            }
        }
        Ok(ram)
    }
}

/// Builds the five-group model; `data` must hold tables keyed MZM, DZM, MZF, DZF and DZO
/// (twin 1 male, twin 2 female in DZO).
pub fn build_sexlim(spec: &SexLimSpec, mut data: BTreeMap<String, ColumnTable>) -> Result<GroupedModel> {
    spec.check()?;
    let missing: Vec<&str> = SEXLIM_GROUPS.iter().copied().filter(|g| !data.contains_key(*g)).collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!("missing group(s): {}", missing.join(", "))));
    }
    if let Some(extra) = data.keys().find(|k| !SEXLIM_GROUPS.contains(&k.as_str())) {
        return Err(Error::Data(format!("unknown group `{extra}`")));
    }
    let sep = &spec.sep;
    let (mean_m, sd_m) = pooled_moments(&spec.sel_dvs, sep, &[&data["MZM"], &data["DZM"]]);
    let (mean_f, sd_f) = pooled_moments(&spec.sel_dvs, sep, &[&data["MZF"], &data["DZF"]]);
    let ordinal = spec
        .sel_dvs
        .iter()
        .map(|v| ordinal_levels(&data["MZM"], &twin_column(v, sep, 1)).is_some())
        .collect();
    let mut model = spec.assemble(&Starts {
        mean: [mean_m, mean_f],
        sd: [sd_m, sd_f],
        ordinal,
    })?;
    let columns: Vec<String> = (1..=2)
        .flat_map(|t| spec.sel_dvs.iter().map(move |v| twin_column(v, sep, t)))
        .collect();
    for group in model.groups.iter_mut() {
        let table = data.remove(&group.name).expect("checked above");
        require_columns(&table, &group.name, &columns)?;
        let (_, s1, s2) = group_layout(&group.name);
        for v in &spec.sel_dvs {
            for (t, sex) in (1..=2).zip([s1, s2]) {
                wire_ordinal(group, &table, &twin_column(v, sep, t), &format!("{v}_{}", sex.tag()))?;
            }
        }
        group.data = Some(table);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ram::expected_moments;

    fn count(vars: &[&str], variant: SexLimVariant) -> usize {
        SexLimSpec::new("s", vars, Qualitative::A, variant)
            .model()
            .unwrap()
            .pack_parameters()
            .unwrap()
            .len()
    }

    #[test]
    fn parameter_counts_increase() {
        use SexLimVariant::*;
        assert_eq!([Homogeneity, Scalar, Nonscalar].map(|v| count(&["x"], v)), [5, 8, 9]);
        assert_eq!(
            [Homogeneity, Scalar, Nonscalar].map(|v| count(&["tri", "bic", "caf"], v)),
            [24, 33, 48]
        );
    }

    #[test]
    fn a_or_c_must_be_a_or_c() {
        assert!("E".parse::<Qualitative>().is_err());
        assert_eq!("C".parse::<Qualitative>().unwrap(), Qualitative::C);
    }

    #[test]
    fn dzo_cross_twin_covariance() {
        let spec = SexLimSpec::new("s", &["x", "y"], Qualitative::A, SexLimVariant::Nonscalar);
        let m = spec.model().unwrap();
        let mut th = m.pack_parameters().unwrap();
        let set = |th: &mut crate::params::ParameterVector, l: &str, v: f64| th.set(l, v).unwrap();
        set(&mut th, "a_m_x", 0.8);
        set(&mut th, "a_f_y", 0.6);
        set(&mut th, "c_m_x", 0.3);
        set(&mut th, "c_f_y", 0.5);
        set(&mut th, "rc_y_x", 0.4);
        set(&mut th, "rao_x_y", 0.7);
        let dzo = m.group("DZO").unwrap();
        let mom = expected_moments(&dzo.model, &th, None).unwrap();
        // x_T1 (male) with y_T2 (female): dzAr·a_m_x·a_f_y·rao + dzCr·c_m_x·c_f_y·rc
        let want = 0.5 * 0.8 * 0.6 * 0.7 + 0.3 * 0.5 * 0.4;
        assert!((mom.sigma[(0, 3)] - want).abs() < 1e-14);
        let mzm = expected_moments(&m.group("MZM").unwrap().model, &th, None).unwrap();
        let dzm = expected_moments(&m.group("DZM").unwrap().model, &th, None).unwrap();
        // same-sex x with cotwin x: r·a² + c²
        let a2 = th.get("a_m_x").unwrap().powi(2);
        let c2 = 0.09;
        assert!((mzm.sigma[(0, 2)] - (a2 + c2)).abs() < 1e-14);
        assert!((dzm.sigma[(0, 2)] - (0.5 * a2 + c2)).abs() < 1e-14);
    }

    #[test]
    fn missing_group_is_reported() {
        let spec = SexLimSpec::new("s", &["x"], Qualitative::A, SexLimVariant::Scalar);
        let e = build_sexlim(&spec, BTreeMap::new()).unwrap_err();
        assert!(e.to_string().contains("MZM"));
    }
}
