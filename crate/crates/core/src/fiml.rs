//! Full-information maximum likelihood over grouped RAM models.
//!
//! Rows are grouped by missingness pattern. Within a pattern the continuous
//! block is handled through one Cholesky factor and the ordinal block through
//! the normal distribution conditional on the observed continuous values.
//! Complete continuous patterns in groups without definition variables are
//! reduced to their sufficient statistics.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnTable};
use crate::error::{Error, Result};
use crate::model::GroupedModel;
use crate::mvn::{mvn_rectangle_with, norm_interval, MvnOptions};
use crate::params::ParameterVector;
use crate::ram::{def_name, MomentProgram, Moments, RamModel};
use crate::thresholds::ThresholdSet;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Why an evaluation returned +inf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalStatus {
    Ok,
    NotPositiveDefinite,
    ThresholdOrder,
    SingularIMinusA,
    ZeroProbability,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub neg2ll: f64,
    pub status: EvalStatus,
}

impl Evaluation {
    fn rejected(status: EvalStatus) -> Self {
        Self {
            neg2ll: f64::INFINITY,
            status,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group: String,
    pub nrows: usize,
    pub used: usize,
    /// Rows with every modelled variable missing; they contribute zero.
    pub empty: usize,
    /// Rows dropped because a definition value is missing.
    pub dropped_defvar: usize,
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy)]
enum ThrSource {
    Fixed(f64),
    Param(usize),
}

#[derive(Debug, Clone)]
struct ThresholdPlan {
    variable: String,
    sources: Vec<ThrSource>,
}

#[derive(Debug, Clone)]
struct Row {
    cont: Vec<f64>,
    codes: Vec<usize>,
    defs: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Summary {
    n: f64,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct Pattern {
    cont: Vec<usize>,
    ord: Vec<usize>,
    rows: Vec<Row>,
    summary: Option<Summary>,
}

#[derive(Debug, Clone)]
struct GroupPlan {
    program: MomentProgram,
    /// Per manifest: index into `thresholds` if ordinal.
    ordinal: Vec<Option<usize>>,
    thresholds: Vec<ThresholdPlan>,
    patterns: Vec<Pattern>,
    stats: GroupStats,
    has_defs: bool,
    affine: bool,
}

/// Continuous factor and ordinal conditional for one pattern at one set of moments.
struct PatternEval {
    chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    logdet: f64,
    /// Sigma_OC Sigma_CC^-1.
    gain: DMatrix<f64>,
    cond_cov: DMatrix<f64>,
}

fn prepare(sigma: &DMatrix<f64>, p: &Pattern) -> Option<PatternEval> {
    let sub = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| sigma[(r[i], c[j])]);
    let scc = sub(&p.cont, &p.cont);
    let soo = sub(&p.ord, &p.ord);
    if p.cont.is_empty() {
        return Some(PatternEval {
            chol: None,
            logdet: 0.0,
            gain: DMatrix::zeros(p.ord.len(), 0),
            cond_cov: soo,
        });
    }
    let chol = scc.cholesky()?;
    let l = chol.l_dirty();
    let mut logdet = 0.0;
    for i in 0..p.cont.len() {
        let d = l[(i, i)];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        logdet += 2.0 * d.ln();
    }
    let (gain, cond_cov) = if p.ord.is_empty() {
        (DMatrix::zeros(0, p.cont.len()), DMatrix::zeros(0, 0))
    } else {
        let soc = sub(&p.ord, &p.cont);
        let gain = chol.solve(&soc.transpose()).transpose();
        let cond = &soo - &gain * soc.transpose();
        let cond = (&cond + cond.transpose()) * 0.5;
        (gain, cond)
    };
    Some(PatternEval {
        chol: Some(chol),
        logdet,
        gain,
        cond_cov,
    })
}

/// The per-row evaluation context shared by `row_neg2ll` and the objective.
struct RowEval<'a> {
    pe: &'a PatternEval,
    pattern: &'a Pattern,
    cuts: &'a [Vec<f64>],
    ordinal: &'a [Option<usize>],
    mvn: &'a MvnOptions,
}

impl RowEval<'_> {
    fn eval(&self, mu: &DVector<f64>, row: &Row) -> std::result::Result<f64, EvalStatus> {
        let p = self.pattern;
        let kc = p.cont.len();
        let mut out = 0.0;
        let mut resid = DVector::zeros(kc);
        if let Some(chol) = &self.pe.chol {
            for (i, &v) in p.cont.iter().enumerate() {
                resid[i] = row.cont[i] - mu[v];
            }
            let z = chol.l_dirty().solve_lower_triangular(&resid).ok_or(EvalStatus::NotPositiveDefinite)?;
            out += kc as f64 * LN_2PI + self.pe.logdet + z.dot(&z);
        }
        if !p.ord.is_empty() {
            let ko = p.ord.len();
            let mut cm = DVector::from_fn(ko, |i, _| mu[p.ord[i]]);
            if kc > 0 {
                cm += &self.pe.gain * &resid;
            }
            let mut lo = vec![0.0; ko];
            let mut hi = vec![0.0; ko];
            for (i, &v) in p.ord.iter().enumerate() {
                let cuts = &self.cuts[self.ordinal[v].expect("ordinal manifest")];
                let c = row.codes[i];
                lo[i] = if c == 0 { f64::NEG_INFINITY } else { cuts[c - 1] };
                hi[i] = if c == cuts.len() { f64::INFINITY } else { cuts[c] };
            }
            let prob = if ko == 1 {
                let sd = self.pe.cond_cov[(0, 0)].sqrt();
                if !(sd > 0.0) {
                    return Err(EvalStatus::NotPositiveDefinite);
                }
                norm_interval((lo[0] - cm[0]) / sd, (hi[0] - cm[0]) / sd)
            } else {
                match mvn_rectangle_with(&cm, &self.pe.cond_cov, &lo, &hi, self.mvn) {
                    Ok(e) => e.value,
                    Err(Error::NotPositiveDefinite(_)) => return Err(EvalStatus::NotPositiveDefinite),
                    Err(_) => return Err(EvalStatus::ZeroProbability),
                }
            };
            if !(prob > 0.0) {
                return Err(EvalStatus::ZeroProbability);
            }
            out -= 2.0 * prob.ln();
        }
        Ok(out)
    }
}

fn summary_neg2ll(pe: &PatternEval, mu: &DVector<f64>, p: &Pattern, s: &Summary) -> Option<f64> {
    let chol = pe.chol.as_ref()?;
    let l = chol.l_dirty();
    let k = p.cont.len();
    let d = DVector::from_fn(k, |i, _| s.mean[i] - mu[p.cont[i]]);
    let z = l.solve_lower_triangular(&d)?;
    let m = l.solve_lower_triangular(&s.scatter)?;
    let m2 = l.solve_lower_triangular(&m.transpose())?;
    Some(s.n * (k as f64 * LN_2PI + pe.logdet + z.dot(&z)) + m2.trace())
}

/// A compiled objective: total -2 ln L of a grouped model as a function of the packed parameter vector.
#[derive(Debug, Clone)]
pub struct FimlObjective {
    labels: Vec<String>,
    groups: Vec<GroupPlan>,
    mvn: MvnOptions,
}

impl FimlObjective {
    pub fn new(model: &GroupedModel, labels: &[String]) -> Result<Self> {
        Self::with_options(model, labels, MvnOptions::default())
    }

    pub fn with_options(model: &GroupedModel, labels: &[String], mvn: MvnOptions) -> Result<Self> {
        let index: HashMap<String, usize> =
            labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        let mut groups = Vec::with_capacity(model.groups.len());
        for g in &model.groups {
            let data = g
                .data
                .as_ref()
                .ok_or_else(|| Error::Data(format!("group `{}` has no bound data", g.name)))?;
            groups.push(plan_group(&g.name, &g.model, &g.thresholds, data, &index, true)?);
        }
        Ok(Self {
            labels: labels.to_vec(),
            groups,
            mvn,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn group_stats(&self) -> Vec<GroupStats> {
        self.groups.iter().map(|g| g.stats.clone()).collect()
    }

    pub fn evaluate(&self, theta: &[f64]) -> Evaluation {
        let mut total = KahanSum::default();
        for g in &self.groups {
            match eval_group(g, theta, &self.mvn, &mut total) {
                Ok(()) => {}
                Err(status) => return Evaluation::rejected(status),
            }
        }
        let v = total.total();
        if v.is_finite() {
            Evaluation {
                neg2ll: v,
                status: EvalStatus::Ok,
            }
        } else {
            Evaluation::rejected(EvalStatus::NotPositiveDefinite)
        }
    }

    /// -2 ln L per group, in group order.
    pub fn evaluate_groups(&self, theta: &[f64]) -> Vec<Evaluation> {
        self.groups
            .iter()
            .map(|g| {
                let mut total = KahanSum::default();
                match eval_group(g, theta, &self.mvn, &mut total) {
                    Ok(()) => Evaluation {
                        neg2ll: total.total(),
                        status: EvalStatus::Ok,
                    },
                    Err(s) => Evaluation::rejected(s),
                }
            })
            .collect()
    }
}

fn eval_group(
    g: &GroupPlan,
    theta: &[f64],
    mvn: &MvnOptions,
    total: &mut KahanSum,
) -> std::result::Result<(), EvalStatus> {
    let mut cuts = Vec::with_capacity(g.thresholds.len());
    for t in &g.thresholds {
        let mut acc = 0.0;
        let mut col = Vec::with_capacity(t.sources.len());
        for (k, s) in t.sources.iter().enumerate() {
            let v = match *s {
                ThrSource::Fixed(v) => v,
                ThrSource::Param(i) => theta[i],
            };
            if k > 0 && !(v > 0.0) {
                return Err(EvalStatus::ThresholdOrder);
            }
            acc = if k == 0 { v } else { acc + v };
            col.push(acc);
        }
        cuts.push(col);
    }
    let moments_err = |e: Error| match e {
        Error::SingularIMinusA => EvalStatus::SingularIMinusA,
        _ => EvalStatus::NotPositiveDefinite,
    };
    let fixed: Option<(Moments, Option<DMatrix<f64>>)> = if !g.has_defs {
        Some((g.program.evaluate(theta, &[]).map_err(moments_err)?, None))
    } else if g.affine {
        let (m, gm) = g.program.evaluate_affine(theta).map_err(moments_err)?;
        Some((m, Some(gm)))
    } else {
        None
    };
    for p in &g.patterns {
        match &fixed {
            Some((moments, gmat)) => {
                let pe = prepare(&moments.sigma, p).ok_or(EvalStatus::NotPositiveDefinite)?;
                if let Some(s) = &p.summary {
                    total.add(
                        summary_neg2ll(&pe, &moments.mu, p, s).ok_or(EvalStatus::NotPositiveDefinite)?,
                    );
                    continue;
                }
                let re = RowEval {
                    pe: &pe,
                    pattern: p,
                    cuts: &cuts,
                    ordinal: &g.ordinal,
                    mvn,
                };
                if gmat.is_none() && p.cont.is_empty() {
                    // Ordinal-only rows depend on the codes alone.
                    let mut cache: HashMap<&[usize], f64> = HashMap::new();
                    for row in &p.rows {
                        let v = match cache.get(row.codes.as_slice()) {
                            Some(&v) => v,
                            None => {
                                let v = re.eval(&moments.mu, row)?;
                                cache.insert(&row.codes, v);
                                v
                            }
                        };
                        total.add(v);
                    }
                    continue;
                }
                for row in &p.rows {
                    let v = match gmat {
                        None => re.eval(&moments.mu, row)?,
                        Some(gm) => {
                            let mut mu = moments.mu.clone();
                            for (d, &x) in row.defs.iter().enumerate() {
                                for i in 0..mu.len() {
                                    mu[i] += gm[(i, d)] * x;
                                }
                            }
                            re.eval(&mu, row)?
                        }
                    };
                    total.add(v);
                }
            }
            None => {
                for row in &p.rows {
                    let m = g.program.evaluate(theta, &row.defs).map_err(moments_err)?;
                    let pe = prepare(&m.sigma, p).ok_or(EvalStatus::NotPositiveDefinite)?;
                    let re = RowEval {
                        pe: &pe,
                        pattern: p,
                        cuts: &cuts,
                        ordinal: &g.ordinal,
                        mvn,
                    };
                    total.add(re.eval(&m.mu, row)?);
                }
            }
        }
    }
    Ok(())
}

fn plan_group(
    name: &str,
    model: &RamModel,
    thresholds: &ThresholdSet,
    data: &ColumnTable,
    index: &HashMap<String, usize>,
    summarize: bool,
) -> Result<GroupPlan> {
    let program = MomentProgram::compile(model, index)?;
    let manifests = model.manifests();
    let mut ordinal = vec![None; manifests.len()];
    let mut plans = Vec::new();
    for t in thresholds.columns() {
        let pos = manifests
            .iter()
            .position(|m| m == &t.variable)
            .ok_or_else(|| Error::Model(format!("thresholds for `{}`, which is not a manifest", t.variable)))?;
        let sources = t
            .deviations
            .iter()
            .map(|c| match (&c.label, c.free) {
                (Some(l), true) => index
                    .get(l)
                    .map(|&i| ThrSource::Param(i))
                    .ok_or_else(|| Error::MissingParameter(l.clone())),
                _ => Ok(ThrSource::Fixed(c.value)),
            })
            .collect::<Result<Vec<_>>>()?;
        ordinal[pos] = Some(plans.len());
        plans.push(ThresholdPlan {
            variable: t.variable.clone(),
            sources,
        });
    }
    // Column views.
    enum View<'a> {
        Cont(&'a [Option<f64>]),
        Ord(&'a [Option<usize>]),
    }
    let mut views = Vec::with_capacity(manifests.len());
    for (i, m) in manifests.iter().enumerate() {
        let col = data
            .get(m)
            .ok_or_else(|| Error::Data(format!("group `{name}`: no column for manifest `{m}`")))?;
        let view = match (col, ordinal[i]) {
            (Column::Continuous(v), None) => View::Cont(v),
            (Column::Ordinal { levels, codes }, Some(t)) => {
                let n = plans[t].sources.len() + 1;
                if levels.len() != n {
                    return Err(Error::Data(format!(
                        "`{m}` has {} levels in the data but {n} in its thresholds",
                        levels.len()
                    )));
                }
                View::Ord(codes)
            }
            (Column::Ordinal { .. }, None) => {
                return Err(Error::Data(format!("ordinal column `{m}` has no thresholds")))
            }
            (Column::Continuous(_), Some(_)) => {
                return Err(Error::Data(format!("`{m}` has thresholds but continuous data")))
            }
            (Column::Text(_), _) => {
                return Err(Error::Data(format!("column `{m}` is text, not numeric")))
            }
        };
        views.push(view);
    }
    let defcols = program
        .defvars()
        .iter()
        .map(|d| data.continuous(d))
        .collect::<Result<Vec<_>>>()?;
    let has_defs = program.has_defvars();
    let mut stats = GroupStats {
        group: name.to_string(),
        nrows: data.nrows(),
        ..GroupStats::default()
    };
    let mut patterns: Vec<Pattern> = Vec::new();
    let mut lookup: HashMap<Vec<bool>, usize> = HashMap::new();
    for r in 0..data.nrows() {
        let defs: Option<Vec<f64>> = defcols.iter().map(|c| c[r]).collect();
        let Some(defs) = defs else {
            stats.dropped_defvar += 1;
            continue;
        };
        let observed: Vec<bool> = views
            .iter()
            .map(|v| match v {
                View::Cont(c) => c[r].is_some(),
                View::Ord(c) => c[r].is_some(),
            })
            .collect();
        if !observed.iter().any(|&o| o) {
            stats.empty += 1;
            continue;
        }
        stats.used += 1;
        let pi = *lookup.entry(observed.clone()).or_insert_with(|| {
            let mut cont = Vec::new();
            let mut ord = Vec::new();
            for (i, v) in views.iter().enumerate() {
                if observed[i] {
                    match v {
                        View::Cont(_) => cont.push(i),
                        View::Ord(_) => ord.push(i),
                    }
                }
            }
            patterns.push(Pattern {
                cont,
                ord,
                rows: Vec::new(),
                summary: None,
            });
            patterns.len() - 1
        });
        let p = &mut patterns[pi];
        let cont = p
            .cont
            .iter()
            .map(|&i| match views[i] {
                View::Cont(c) => c[r].unwrap(),
                View::Ord(_) => unreachable!(),
            })
            .collect();
        let codes = p
            .ord
            .iter()
            .map(|&i| match views[i] {
                View::Ord(c) => c[r].unwrap(),
                View::Cont(_) => unreachable!(),
            })
            .collect();
        p.rows.push(Row { cont, codes, defs });
    }
    if summarize && !has_defs {
        for p in &mut patterns {
            if p.ord.is_empty() && p.rows.len() > 1 {
                let k = p.cont.len();
                let n = p.rows.len() as f64;
                let mut mean = DVector::zeros(k);
                for row in &p.rows {
                    for i in 0..k {
                        mean[i] += row.cont[i];
                    }
                }
                mean /= n;
                let mut scatter = DMatrix::zeros(k, k);
                for row in &p.rows {
                    let d = DVector::from_fn(k, |i, _| row.cont[i] - mean[i]);
                    scatter += &d * d.transpose();
                }
                p.summary = Some(Summary { n, mean, scatter });
                p.rows.clear();
            }
        }
    }
    Ok(GroupPlan {
        affine: program.defs_only_in_means(),
        program,
        ordinal,
        thresholds: plans,
        patterns,
        stats,
        has_defs,
    })
}

/// -2 ln L of a single data row. A row with every modelled variable missing contributes 0;
/// a non-positive-definite trimmed covariance gives +inf.
pub fn row_neg2ll(
    model: &RamModel,
    theta: &ParameterVector,
    thresholds: &ThresholdSet,
    data: &ColumnTable,
    row: usize,
) -> Result<f64> {
    if row >= data.nrows() {
        return Err(Error::Data(format!("row {row} out of range")));
    }
    let one = data.take_rows(&[row]);
    let plan = plan_group(&model.name, model, thresholds, &one, &theta.index(), false)?;
    if plan.stats.dropped_defvar > 0 {
        let missing = model
            .defvars()
            .iter()
            .find(|d| one.continuous(d).map_or(true, |c| c[0].is_none()))
            .cloned()
            .unwrap_or_default();
        return Err(Error::MissingDefinitionValue(missing));
    }
    let mut total = KahanSum::default();
    match eval_group(&plan, theta.values(), &MvnOptions::default(), &mut total) {
        Ok(()) => Ok(total.total()),
        Err(EvalStatus::ThresholdOrder) => Err(Error::ThresholdOrder(
            plan.thresholds.first().map(|t| t.variable.clone()).unwrap_or_default(),
        )),
        Err(_) => Ok(f64::INFINITY),
    }
}

/// Total -2 ln L of a grouped model with bound data at `theta`.
pub fn total_neg2ll(model: &GroupedModel, theta: &ParameterVector) -> Result<f64> {
    let obj = FimlObjective::new(model, theta.labels())?;
    Ok(obj.evaluate(theta.values()).neg2ll)
}

/// Manifests whose expected mean or covariance depends on definition column `col`.
pub fn reachable_defvar_targets(model: &RamModel, col: &str) -> Result<BTreeSet<String>> {
    let def = def_name(col);
    let n = model.n_vars();
    let mut seeds: Vec<usize> = Vec::new();
    let declared = model.defvars().iter().any(|d| d == col);
    if declared {
        if let Some(i) = model.index_of(&def) {
            seeds.push(i);
        }
    }
    let mut labelled = false;
    model.for_each_cell(|matrix, r, c, cell| {
        if cell.label.as_deref() == Some(def.as_str()) {
            labelled = true;
            seeds.push(r);
            if matrix == crate::ram::Matrix::S {
                seeds.push(c);
            }
        }
    });
    if !declared && !labelled {
        return Err(Error::UndeclaredDefinitionVariable(col.to_string()));
    }
    let mut children = vec![Vec::new(); n];
    for (r, c, cell) in model.a().iter() {
        if cell.free || cell.value != 0.0 || cell.label.is_some() {
            children[c].push(r);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = seeds;
    while let Some(v) = stack.pop() {
        if std::mem::replace(&mut seen[v], true) {
            continue;
        }
        stack.extend(children[v].iter().copied());
    }
    Ok(model
        .manifests()
        .iter()
        .enumerate()
        .filter(|(i, _)| seen[*i])
        .map(|(_, m)| m.clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Group;
    use crate::ram::PathSpec;
    use crate::thresholds::ThresholdColumn;

    fn table(cols: &[(&str, Vec<Option<f64>>)]) -> ColumnTable {
        let mut t = ColumnTable::new();
        for (n, v) in cols {
            t.insert_continuous(n, v.clone()).unwrap();
        }
        t
    }

    fn unit_model() -> RamModel {
        let mut m = RamModel::new("u", &["x"], &[] as &[&str]).unwrap();
        m.add_path(&PathSpec::variance("x").label("v")).unwrap();
        m.add_path(&PathSpec::mean("x").label("mx")).unwrap();
        m
    }

    #[test]
    fn standard_normal_at_zero() {
        let theta = ParameterVector::from_pairs(&[("v", 1.0), ("mx", 0.0)]).unwrap();
        let data = table(&[("x", vec![Some(0.0)])]);
        let v = row_neg2ll(&unit_model(), &theta, &ThresholdSet::new(), &data, 0).unwrap();
        assert!((v - (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn summary_path_matches_row_sum() {
        let xs: Vec<Option<f64>> = (0..50).map(|i| Some((i as f64 * 0.37).sin() * 2.0 + 1.0)).collect();
        let data = table(&[("x", xs)]);
        let theta = ParameterVector::from_pairs(&[("v", 1.7), ("mx", 0.4)]).unwrap();
        let model = GroupedModel::single(unit_model());
        let mut gm = model.clone();
        gm.bind("u", data.clone()).unwrap();
        let total = total_neg2ll(&gm, &theta).unwrap();
        let by_row: f64 = (0..50)
            .map(|r| row_neg2ll(&unit_model(), &theta, &ThresholdSet::new(), &data, r).unwrap())
            .sum();
        assert!((total - by_row).abs() < 1e-9 * by_row.abs());
    }

    #[test]
    fn empty_rows_contribute_zero_and_are_counted() {
        let mut gm = GroupedModel::single(unit_model());
        gm.bind("u", table(&[("x", vec![None, Some(0.0), None])])).unwrap();
        let theta = ParameterVector::from_pairs(&[("v", 1.0), ("mx", 0.0)]).unwrap();
        let obj = FimlObjective::new(&gm, theta.labels()).unwrap();
        assert!((obj.evaluate(theta.values()).neg2ll - LN_2PI).abs() < 1e-14);
        let st = &obj.group_stats()[0];
        assert_eq!((st.used, st.empty), (1, 2));
    }

    #[test]
    fn censored_row_is_normal_cdf() {
        let mut m = RamModel::new("icu", &["xbin", "xcont"], &["L"]).unwrap();
        m.add_path(&PathSpec::one_headed("L", "xbin").fixed(1.0)).unwrap();
        m.add_path(&PathSpec::one_headed("L", "xcont").fixed(1.0)).unwrap();
        m.add_path(&PathSpec::variance("L").label("s2")).unwrap();
        m.add_path(&PathSpec::mean("L").label("mu")).unwrap();
        let levels = vec!["<low>".to_string(), "<high>".to_string()];
        let mut th = ThresholdSet::new();
        th.insert(ThresholdColumn::fixed("xbin", &levels, &[0.5]).unwrap()).unwrap();
        let mut data = ColumnTable::new();
        data.insert(
            "xbin",
            Column::Ordinal {
                levels: levels.clone(),
                codes: vec![Some(0), None],
            },
        )
        .unwrap();
        data.insert_continuous("xcont", vec![None, Some(1.3)]).unwrap();
        let theta = ParameterVector::from_pairs(&[("s2", 1.44), ("mu", 1.0)]).unwrap();
        let v0 = row_neg2ll(&m, &theta, &th, &data, 0).unwrap();
        let expect = -2.0 * crate::mvn::norm_cdf((0.5 - 1.0) / 1.2).ln();
        assert!((v0 - expect).abs() < 1e-12);
        let v1 = row_neg2ll(&m, &theta, &th, &data, 1).unwrap();
        let z: f64 = (1.3 - 1.0) / 1.2;
        assert!((v1 - (LN_2PI + 1.44f64.ln() + z * z)).abs() < 1e-12);
        // Both observed would need the singular joint block.
        let mut both = data.clone();
        both.insert_continuous("xcont", vec![Some(0.1), Some(1.3)]).unwrap();
        assert_eq!(row_neg2ll(&m, &theta, &th, &both, 0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn missing_definition_value_drops_row() {
        let mut m = RamModel::new("d", &["x"], &[] as &[&str]).unwrap();
        m.add_path(&PathSpec::defn("age")).unwrap();
        m.add_path(&PathSpec::one_headed("def_age", "x").label("b")).unwrap();
        m.add_path(&PathSpec::variance("x").label("v")).unwrap();
        let data = table(&[("x", vec![Some(1.0), Some(2.0)]), ("age", vec![Some(1.0), None])]);
        let mut gm = GroupedModel::new("d");
        gm.push(Group::new("d", m.clone()).with_data(data.clone())).unwrap();
        let theta = ParameterVector::from_pairs(&[("b", 0.5), ("v", 1.0)]).unwrap();
        let obj = FimlObjective::new(&gm, theta.labels()).unwrap();
        assert_eq!(obj.group_stats()[0].dropped_defvar, 1);
        let e = obj.evaluate(theta.values()).neg2ll;
        assert!((e - (LN_2PI + 0.25)).abs() < 1e-14);
        assert!(matches!(
            row_neg2ll(&m, &theta, &ThresholdSet::new(), &data, 1),
            Err(Error::MissingDefinitionValue(_))
        ));
    }

    #[test]
    fn reach_sets() {
        let mut m = RamModel::new("r", &["y1", "y2", "y3"], &["F"]).unwrap();
        m.add_path(&PathSpec::defn("z")).unwrap();
        m.add_path(&PathSpec::defn("w")).unwrap();
        m.add_path(&PathSpec::one_headed("def_z", "F")).unwrap();
        for y in ["y1", "y2", "y3"] {
            m.add_path(&PathSpec::one_headed("F", y)).unwrap();
        }
        let all: BTreeSet<String> = ["y1", "y2", "y3"].iter().map(|s| s.to_string()).collect();
        assert_eq!(reachable_defvar_targets(&m, "z").unwrap(), all);
        assert!(reachable_defvar_targets(&m, "w").unwrap().is_empty());
        assert!(reachable_defvar_targets(&m, "nope").is_err());
    }
}
