//! Direction-of-causation twin models with polygenic-score instruments.

use std::str::FromStr;

use crate::builders::twin::{pooled_moments, TwinOptions};
use crate::builders::{ordinal_levels, require_columns, twin_column, wire_ordinal};
use crate::data::ColumnTable;
use crate::error::{Error, Result};
use crate::model::{Group, GroupedModel};
use crate::ram::{PathSpec, RamModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrDocVariant {
    /// No instrument; e21 fixed at 0.
    Doc,
    /// One instrument with a pleiotropic path b2 to the outcome; e21 fixed at 0.
    MrDoc,
    /// One instrument per phenotype, causal paths both ways, all confounding free.
    MrDoc2,
}

impl FromStr for MrDocVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "doc" => Ok(Self::Doc),
            "mrdoc" => Ok(Self::MrDoc),
            "mrdoc2" => Ok(Self::MrDoc2),
            _ => Err(Error::Model(format!("unknown MR-DoC variant `{s}`"))),
        }
    }
}

impl MrDocVariant {
    fn n_instruments(self) -> usize {
        match self {
            Self::Doc => 0,
            Self::MrDoc => 1,
            Self::MrDoc2 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrDocSpec {
    pub name: String,
    /// (exposure, outcome)
    pub pheno: [String; 2],
    pub prss: Vec<String>,
    pub variant: MrDocVariant,
    /// Non-twin siblings: A and C merge into one familial factor F, single group `SIB`.
    pub sibling: bool,
    /// MZ twins carry one score per pair: the MZ group models `<prs><sep>1` only and both
    /// twins' paths start from it. Set automatically by [`build_mrdoc`] when the MZ columns
    /// are identical, since their covariance would otherwise be singular.
    pub mz_shared_prs: bool,
    pub opts: TwinOptions,
}

struct Starts {
    mean: Vec<f64>,
    sd: Vec<f64>,
    ordinal: [bool; 2],
}

impl MrDocSpec {
    pub fn new(name: &str, exposure: &str, outcome: &str, prss: &[&str], variant: MrDocVariant) -> Self {
        Self {
            name: name.into(),
            pheno: [exposure.into(), outcome.into()],
            prss: prss.iter().map(|s| s.to_string()).collect(),
            variant,
            sibling: false,
            mz_shared_prs: false,
            opts: TwinOptions::default(),
        }
    }

    fn check(&self) -> Result<()> {
        self.opts.validate()?;
        let want = self.variant.n_instruments();
        if self.prss.len() != want {
            return Err(Error::Model(format!(
                "{:?} takes exactly {want} instrument(s), got {}",
                self.variant,
                self.prss.len()
            )));
        }
        if self.sibling && self.variant != MrDocVariant::MrDoc2 {
            return Err(Error::Model(
                "sibling mode is only identified for MrDoc2".into(),
            ));
        }
        if self.pheno[0] == self.pheno[1] {
            return Err(Error::Model("exposure and outcome must differ".into()));
        }
        Ok(())
    }

    pub fn group_names(&self) -> Vec<&'static str> {
        if self.sibling {
            vec!["SIB"]
        } else {
            vec!["MZ", "DZ"]
        }
    }

    /// Base names of all observed variables: exposure, outcome, instruments.
    pub fn bases(&self) -> Vec<String> {
        self.pheno.iter().chain(&self.prss).cloned().collect()
    }

    pub fn model(&self) -> Result<GroupedModel> {
        self.check()?;
        let nb = self.bases().len();
        self.assemble(&Starts {
            mean: vec![0.0; nb],
            sd: vec![1.0; nb],
            ordinal: [false; 2],
        })
    }

    fn assemble(&self, st: &Starts) -> Result<GroupedModel> {
        let comps: &[char] = if self.sibling { &['f', 'e'] } else { &['a', 'c', 'e'] };
        let sep = &self.opts.sep;
        let bases = self.bases();
        let mut model = GroupedModel::new(&self.name);
        for g in self.group_names() {
            let (ra, rc) = match g {
                "DZ" => (self.opts.dz_ar, self.opts.dz_cr),
                _ => (1.0, 1.0),
            };
            let shared = self.mz_shared_prs && g == "MZ";
            let manifests: Vec<String> = (1..=2)
                .flat_map(|t| {
                    bases
                        .iter()
                        .filter(move |b| !(shared && t == 2 && self.prss.contains(b)))
                        .map(move |b| twin_column(b, sep, t))
                })
                .collect();
            // where twin t's score lives
            let score = |p: &str, t: usize| twin_column(p, sep, if shared { 1 } else { t });
            let latents: Vec<String> = (1..=2)
                .flat_map(|t| {
                    comps.iter().flat_map(move |c| {
                        (1..=2).map(move |k| twin_column(&format!("{}{k}", c.to_ascii_uppercase()), sep, t))
                    })
                })
                .collect();
            let mut ram = RamModel::new(g, &manifests, &latents)?;
            let gl = g.to_ascii_lowercase();
            for t in 1..=2 {
                let v = |b: &str| twin_column(b, sep, t);
                let (x, y) = (v(&self.pheno[0]), v(&self.pheno[1]));
                for &c in comps {
                    let l = |k: usize| v(&format!("{}{k}", c.to_ascii_uppercase()));
                    for k in 1..=2 {
                        ram.add_path(&PathSpec::variance(&l(k)).fixed(1.0))?;
                    }
                    let share = 1.0 / (comps.len() as f64).sqrt();
                    let lx = PathSpec::one_headed(&l(1), &x).label(&format!("{c}11"));
                    ram.add_path(&if c == 'e' && st.ordinal[0] { lx.fixed(1.0) } else { lx.start(st.sd[0] * share) })?;
                    let ly = PathSpec::one_headed(&l(2), &y).label(&format!("{c}22"));
                    ram.add_path(&if c == 'e' && st.ordinal[1] { ly.fixed(1.0) } else { ly.start(st.sd[1] * share) })?;
                    if c != 'e' || self.variant == MrDocVariant::MrDoc2 {
                        ram.add_path(&PathSpec::one_headed(&l(1), &y).label(&format!("{c}21")).start(0.1 * st.sd[1]))?;
                    }
                }
                ram.add_path(&PathSpec::one_headed(&x, &y).label("g1").start(0.1))?;
                match self.variant {
                    MrDocVariant::Doc => {}
                    MrDocVariant::MrDoc => {
                        let p = score(&self.prss[0], t);
                        ram.add_path(&PathSpec::one_headed(&p, &x).label("b1").start(0.1))?;
                        ram.add_path(&PathSpec::one_headed(&p, &y).label("b2").start(0.0))?;
                    }
                    MrDocVariant::MrDoc2 => {
                        ram.add_path(&PathSpec::one_headed(&y, &x).label("g2").start(0.0))?;
                        let (p1, p2) = (score(&self.prss[0], t), score(&self.prss[1], t));
                        ram.add_path(&PathSpec::one_headed(&p1, &x).label("b1").start(0.1))?;
                        ram.add_path(&PathSpec::one_headed(&p2, &y).label("b2").start(0.1))?;
                        ram.add_path(
                            &PathSpec::two_headed(&p1, &p2)
                                .label(&format!("cov_{}_{}", self.prss[0], self.prss[1]))
                                .start(0.0),
                        )?;
                    }
                }
                for (i, b) in bases.iter().enumerate() {
                    if shared && t == 2 && i >= 2 {
                        continue;
                    }
                    let m = PathSpec::mean(&v(b)).label(&format!("mean_{b}"));
                    ram.add_path(&if i < 2 && st.ordinal[i] { m.fixed(0.0) } else { m.start(st.mean[i]) })?;
                }
                for (i, p) in self.prss.iter().enumerate() {
                    let var = st.sd[2 + i].powi(2);
                    ram.add_path(&PathSpec::variance(&score(p, t)).label(&format!("var_{p}")).start(var))?;
                }
            }
            for &c in comps {
                let r = match c {
                    'a' => ra,
                    'c' | 'f' => rc,
                    _ => continue,
                };
                for k in 1..=2 {
                    let l = format!("{}{k}", c.to_ascii_uppercase());
                    ram.add_path(&PathSpec::two_headed(&twin_column(&l, sep, 1), &twin_column(&l, sep, 2)).fixed(r))?;
                }
            }
            for (i, p) in self.prss.iter().enumerate().filter(|_| !shared) {
                let start = 0.5 * st.sd[2 + i].powi(2);
                ram.add_path(
                    &PathSpec::two_headed(&twin_column(p, sep, 1), &twin_column(p, sep, 2))
                        .label(&format!("cov_{p}_{gl}"))
                        .start(start),
                )?;
            }
            if self.variant == MrDocVariant::MrDoc2 && !shared {
                let label = format!("cov_{}_{}_{gl}", self.prss[0], self.prss[1]);
                for (a, b) in [(1, 2), (2, 1)] {
                    ram.add_path(
                        &PathSpec::two_headed(&twin_column(&self.prss[0], sep, a), &twin_column(&self.prss[1], sep, b))
                            .label(&label)
                            .start(0.0),
                    )?;
                }
            }
            model.push(Group::new(g, ram))?;
        }
        for p in &self.prss {
            model.set_bound(&format!("var_{p}"), 1e-6, f64::INFINITY);
        }
        Ok(model)
    }
}

/// True when both columns exist and agree (to 1e-9 relative) on every row where both are
/// observed, with at least one such row.
fn identical_pair(data: &ColumnTable, a: &str, b: &str) -> bool {
    let (Ok(x), Ok(y)) = (data.continuous(a), data.continuous(b)) else {
        return false;
    };
    let mut both = x.iter().zip(y).filter_map(|(p, q)| Some((p.as_ref()?, q.as_ref()?))).peekable();
    both.peek().is_some() && both.all(|(p, q)| (p - q).abs() <= 1e-9 * p.abs().max(1.0))
}

/// Copies `from` into `into` where `into` is missing (or absent).
fn fill_from_cotwin(data: &mut ColumnTable, into: &str, from: &str) -> Result<()> {
    let Ok(src) = data.continuous(from).map(<[_]>::to_vec) else {
        return Ok(());
    };
    if !data.has(into) {
        return data.insert_continuous(into, src);
    }
    for (d, s) in data.continuous_mut(into)?.iter_mut().zip(src) {
        if d.is_none() {
            *d = s;
        }
    }
    Ok(())
}

/// Builds the model and binds `mz` and `dz` (or, in sibling mode, `mz` as the sibling table
/// with `dz` absent).
pub fn build_mrdoc(spec: &MrDocSpec, mz: ColumnTable, dz: Option<ColumnTable>) -> Result<GroupedModel> {
    spec.check()?;
    let tables: Vec<ColumnTable> = match (spec.sibling, dz) {
        (true, None) => vec![mz],
        (true, Some(_)) => return Err(Error::Model("sibling mode takes a single dataset".into())),
        (false, Some(dz)) => vec![mz, dz],
        (false, None) => return Err(Error::Model("DZ data is required".into())),
    };
    let sep = &spec.opts.sep;
    let bases = spec.bases();
    let refs: Vec<&ColumnTable> = tables.iter().collect();
    let (mean, sd) = pooled_moments(&bases, sep, &refs);
    let ordinal = [0, 1].map(|i| ordinal_levels(&tables[0], &twin_column(&bases[i], sep, 1)).is_some());
    for p in &spec.prss {
        if ordinal_levels(&tables[0], &twin_column(p, sep, 1)).is_some() {
            return Err(Error::Data(format!("instrument `{p}` must be continuous")));
        }
    }
    let mut spec = spec.clone();
    if !spec.sibling && !spec.prss.is_empty() {
        spec.mz_shared_prs |= spec
            .prss
            .iter()
            .all(|p| identical_pair(&tables[0], &twin_column(p, sep, 1), &twin_column(p, sep, 2)));
    }
    let mut model = spec.assemble(&Starts { mean, sd, ordinal })?;
    for (group, mut data) in model.groups.iter_mut().zip(tables) {
        let shared = spec.mz_shared_prs && group.name == "MZ";
        if shared {
            for p in &spec.prss {
                fill_from_cotwin(&mut data, &twin_column(p, sep, 1), &twin_column(p, sep, 2))?;
            }
        }
        require_columns(&data, &group.name, group.model.manifests())?;
        for b in &spec.pheno {
            for t in 1..=2 {
                wire_ordinal(group, &data, &twin_column(b, sep, t), b)?;
            }
        }
        group.data = Some(data);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ram::expected_moments;

    fn labels(spec: &MrDocSpec) -> Vec<String> {
        spec.model().unwrap().pack_parameters().unwrap().labels().to_vec()
    }

    #[test]
    fn mrdoc_frees_pleiotropy_and_fixes_re() {
        let spec = MrDocSpec::new("m", "BMI", "SBP", &["PRS_BMI"], MrDocVariant::MrDoc);
        let l = labels(&spec);
        for want in ["b1", "b2", "g1", "a21", "c21", "cov_PRS_BMI_mz", "cov_PRS_BMI_dz"] {
            assert!(l.iter().any(|x| x == want), "{want}");
        }
        assert!(!l.iter().any(|x| x == "e21"));
    }

    #[test]
    fn instrument_arity_and_sibling_rules() {
        let one = MrDocSpec::new("m", "x", "y", &["p"], MrDocVariant::MrDoc2);
        assert!(one.model().is_err());
        let mut doc = MrDocSpec::new("m", "x", "y", &[], MrDocVariant::Doc);
        assert!(doc.model().is_ok());
        doc.sibling = true;
        assert!(doc.model().is_err());
        let mut two = MrDocSpec::new("m", "x", "y", &["px", "py"], MrDocVariant::MrDoc2);
        two.sibling = true;
        let m = two.model().unwrap();
        assert_eq!(m.groups.len(), 1);
        assert!(m.pack_parameters().unwrap().labels().iter().any(|x| x == "f21"));
    }

    #[test]
    fn cross_twin_blocks() {
        let spec = MrDocSpec::new("m", "x", "y", &[], MrDocVariant::Doc);
        let m = spec.model().unwrap();
        let mut theta = m.pack_parameters().unwrap();
        for (l, v) in [("a11", 0.6), ("c11", 0.4), ("e11", 0.5), ("g1", 0.0), ("a21", 0.0), ("c21", 0.0)] {
            theta.set(l, v).unwrap();
        }
        let mz = expected_moments(&m.groups[0].model, &theta, None).unwrap();
        let dz = expected_moments(&m.groups[1].model, &theta, None).unwrap();
        // manifests: x_T1, y_T1, x_T2, y_T2
        assert!((mz.sigma[(0, 2)] - (0.36 + 0.16)).abs() < 1e-15);
        assert!((dz.sigma[(0, 2)] - (0.18 + 0.16)).abs() < 1e-15);
    }
}
