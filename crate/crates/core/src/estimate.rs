//! Maximum-likelihood fitting, standard errors and likelihood-ratio tests.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::fiml::{FimlObjective, GroupStats};
use crate::model::GroupedModel;
use crate::mvn::MvnOptions;
use crate::optim::{hessian, minimize, project, OptimOptions, OptimStatus};
use crate::params::ParameterVector;
use crate::ram::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub seed: u64,
    /// Jittered restarts tried when the first run does not converge.
    pub multistarts: usize,
    pub standard_errors: bool,
    pub mvn: MvnOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            grad_tol: 1e-6,
            seed: 0,
            multistarts: 5,
            standard_errors: true,
            mvn: MvnOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub label: String,
    pub matrix: Matrix,
    pub value: f64,
    pub se: Option<f64>,
    pub at_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub name: String,
    pub estimates: Vec<Estimate>,
    pub neg2ll: f64,
    pub nfree: usize,
    pub aic: f64,
    pub status: OptimStatus,
    pub start_neg2ll: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub groups: Vec<GroupStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Tsv,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Schema(format!("unknown report format `{other}`"))),
        }
    }
}

impl FitResult {
    pub fn theta(&self) -> ParameterVector {
        ParameterVector::new(
            self.estimates.iter().map(|e| e.label.clone()).collect(),
            self.estimates.iter().map(|e| e.value).collect(),
        )
        .expect("estimate labels are unique")
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.estimates.iter().find(|e| e.label == label).map(|e| e.value)
    }

    pub fn converged(&self) -> bool {
        self.status == OptimStatus::Converged
    }

    /// Estimates ordered by (matrix, label).
    pub fn sorted_estimates(&self) -> Vec<&Estimate> {
        let mut v: Vec<&Estimate> = self.estimates.iter().collect();
        v.sort_by(|a, b| (a.matrix, &a.label).cmp(&(b.matrix, &b.label)));
        v
    }

    /// Parameter table; `ci` adds Wald 95% limits where an SE exists.
    pub fn summary(&self, format: ReportFormat, ci: bool) -> String {
        let rows = self.sorted_estimates();
        if format == ReportFormat::Json {
            let table: Vec<serde_json::Value> = rows
                .iter()
                .map(|e| {
                    let mut v = serde_json::json!({
                        "label": e.label,
                        "matrix": e.matrix.as_str(),
                        "estimate": e.value,
                        "se": e.se,
                        "at_bound": e.at_bound,
                    });
                    if ci {
                        v["lower"] = e.se.map(|s| e.value - 1.959_963_984_540_054 * s).into();
                        v["upper"] = e.se.map(|s| e.value + 1.959_963_984_540_054 * s).into();
                    }
                    v
                })
                .collect();
            let doc = serde_json::json!({
                "name": self.name,
                "estimates": table,
                "fit": self.fit_indices(),
            });
            return serde_json::to_string_pretty(&doc).expect("summary serializes") + "\n";
        }
        let sep = if format == ReportFormat::Tsv { "\t" } else { "," };
        let mut out = String::new();
        let mut header = vec!["label", "matrix", "estimate", "se"];
        if ci {
            header.extend(["lower", "upper"]);
        }
        out.push_str(&header.join(sep));
        out.push('\n');
        for e in rows {
            let se = e.se.map_or_else(|| "NA".to_string(), |s| format!("{s:.6}"));
            let mut cells = vec![e.label.clone(), e.matrix.as_str().to_string(), format!("{:.6}", e.value), se];
            if ci {
                for sign in [-1.0, 1.0] {
                    cells.push(e.se.map_or_else(
                        || "NA".to_string(),
                        |s| format!("{:.6}", e.value + sign * 1.959_963_984_540_054 * s),
                    ));
                }
            }
            out.push_str(&cells.join(sep));
            out.push('\n');
        }
        out
    }

    pub fn fit_indices(&self) -> serde_json::Value {
        serde_json::json!({
            "neg2ll": self.neg2ll,
            "nfree": self.nfree,
            "aic": self.aic,
            "status": self.status.as_str(),
            "iterations": self.iterations,
            "groups": self.groups,
        })
    }

    pub fn fit_table(&self, format: ReportFormat) -> String {
        if format == ReportFormat::Json {
            return serde_json::to_string_pretty(&self.fit_indices()).expect("fit serializes") + "\n";
        }
        let sep = if format == ReportFormat::Tsv { "\t" } else { "," };
        let mut out = String::new();
        let _ = writeln!(out, "statistic{sep}value");
        let _ = writeln!(out, "neg2ll{sep}{:.6}", self.neg2ll);
        let _ = writeln!(out, "nfree{sep}{}", self.nfree);
        let _ = writeln!(out, "aic{sep}{:.6}", self.aic);
        let _ = writeln!(out, "status{sep}{}", self.status.as_str());
        for g in &self.groups {
            let _ = writeln!(out, "{}.rows_used{sep}{}", g.group, g.used);
            let _ = writeln!(out, "{}.rows_empty{sep}{}", g.group, g.empty);
            let _ = writeln!(out, "{}.rows_dropped{sep}{}", g.group, g.dropped_defvar);
        }
        out
    }
}

fn jitter(x: &[f64], bounds: &[Option<(f64, f64)>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out: Vec<f64> = x
        .iter()
        .map(|&v| v * rng.random_range(0.75..1.25) + rng.random_range(-0.1..0.1))
        .collect();
    project(&mut out, bounds);
    out
}

/// Fits from the model's current start values.
pub fn fit(model: &GroupedModel, opts: &FitOptions) -> Result<FitResult> {
    let start = model.pack_parameters()?;
    fit_from(model, &start, opts)
}

/// Fits from explicit start values (labels must match the model's free parameters).
pub fn fit_from(model: &GroupedModel, start: &ParameterVector, opts: &FitOptions) -> Result<FitResult> {
    if start.is_empty() {
        return Err(Error::Estimation("model has no free parameters".into()));
    }
    let packed = model.pack_parameters()?;
    if packed.labels() != start.labels() {
        return Err(Error::Estimation("start labels do not match the model".into()));
    }
    let obj = FimlObjective::with_options(model, start.labels(), opts.mvn)?;
    let f = |x: &[f64]| obj.evaluate(x).neg2ll;
    let bounds = packed.bounds().to_vec();
    let oo = OptimOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
    };
    let mut x0 = start.values().to_vec();
    project(&mut x0, &bounds);
    let start_neg2ll = f(&x0);
    let mut best = minimize(f, &x0, &bounds, &oo);
    let mut iterations = best.iterations;
    let mut evaluations = best.evaluations;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut tries = 0;
    while best.status != OptimStatus::Converged && tries < opts.multistarts {
        tries += 1;
        let xs = jitter(&x0, &bounds, &mut rng);
        if !f(&xs).is_finite() {
            continue;
        }
        let r = minimize(f, &xs, &bounds, &oo);
        iterations += r.iterations;
        evaluations += r.evaluations;
        let better = match (r.status == OptimStatus::Converged, best.status == OptimStatus::Converged) {
            (true, false) => true,
            (false, true) => false,
            _ => r.f < best.f,
        };
        if better {
            best = r;
        }
    }
    if !best.f.is_finite() {
        return Err(Error::Estimation(
            "likelihood is infinite at the start values and at every restart".into(),
        ));
    }
    let theta = start.with_values(&best.x);
    let mut status = best.status;
    let (ses, at_bound) = if opts.standard_errors && status == OptimStatus::Converged {
        let se = standard_errors_with(&obj, &theta)?;
        if !se.positive_definite {
            status = OptimStatus::NonPdHessian;
        }
        (se.se, se.at_bound)
    } else {
        (vec![None; theta.len()], bound_flags(&theta))
    };
    let infos = model.free_labels()?;
    let estimates = infos
        .iter()
        .zip(theta.values())
        .zip(ses.into_iter().zip(at_bound))
        .map(|((info, &value), (se, at_bound))| Estimate {
            label: info.label.clone(),
            matrix: info.matrix,
            value,
            se,
            at_bound,
        })
        .collect();
    let nfree = theta.len();
    Ok(FitResult {
        name: model.name.clone(),
        estimates,
        neg2ll: best.f,
        nfree,
        aic: best.f + 2.0 * nfree as f64,
        status,
        start_neg2ll,
        iterations,
        evaluations,
        groups: obj.group_stats(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardErrors {
    pub se: Vec<Option<f64>>,
    pub at_bound: Vec<bool>,
    pub positive_definite: bool,
}

fn bound_flags(theta: &ParameterVector) -> Vec<bool> {
    theta
        .values()
        .iter()
        .zip(theta.bounds())
        .map(|(&v, b)| match b {
            None => false,
            Some((lo, hi)) => {
                let h = (1e-4 * v.abs()).max(1e-4);
                v - h < *lo || v + h > *hi
            }
        })
        .collect()
}

/// SEs from the inverse of half the -2 ln L Hessian. Parameters at (or within one difference
/// step of) a bound are excluded and reported without an SE.
pub fn standard_errors(model: &GroupedModel, theta_hat: &ParameterVector) -> Result<StandardErrors> {
    let obj = FimlObjective::new(model, theta_hat.labels())?;
    standard_errors_with(&obj, theta_hat)
}

fn standard_errors_with(obj: &FimlObjective, theta: &ParameterVector) -> Result<StandardErrors> {
    let at_bound = bound_flags(theta);
    let interior: Vec<usize> = (0..theta.len()).filter(|&i| !at_bound[i]).collect();
    let base = theta.values().to_vec();
    let mut sub = |y: &[f64]| {
        let mut x = base.clone();
        for (k, &i) in interior.iter().enumerate() {
            x[i] = y[k];
        }
        obj.evaluate(&x).neg2ll
    };
    let y0: Vec<f64> = interior.iter().map(|&i| base[i]).collect();
    let h = hessian(&mut sub, &y0);
    let mut se = vec![None; theta.len()];
    let inv = if h.iter().all(|v| v.is_finite()) {
        h.clone().cholesky().map(|c| c.inverse())
    } else {
        None
    };
    let positive_definite = inv.is_some();
    if let Some(inv) = inv {
        for (k, &i) in interior.iter().enumerate() {
            let v = 2.0 * inv[(k, k)];
            se[i] = (v > 0.0).then(|| v.sqrt());
        }
    }
    Ok(StandardErrors {
        se,
        at_bound,
        positive_definite,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lrt {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
}

/// Likelihood-ratio test of `nested` against `full`. Two fits with equal parameter counts and
/// equal -2 ln L (within 1e-6) give chi2 = 0, df = 0, p = 1.
pub fn lrt(full: &FitResult, nested: &FitResult) -> Result<Lrt> {
    let chi2 = nested.neg2ll - full.neg2ll;
    if chi2 < -1e-6 {
        return Err(Error::Estimation(format!(
            "negative chi-square {chi2:.3e}: models are not nested or a fit did not converge"
        )));
    }
    let chi2 = chi2.max(0.0);
    if nested.nfree == full.nfree && chi2 <= 1e-6 {
        return Ok(Lrt { chi2: 0.0, df: 0, p: 1.0 });
    }
    if nested.nfree >= full.nfree {
        return Err(Error::Estimation(format!(
            "nested model has {} free parameters, full has {}",
            nested.nfree, full.nfree
        )));
    }
    let df = full.nfree - nested.nfree;
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::Estimation(e.to_string()))?;
    Ok(Lrt {
        chi2,
        df,
        p: dist.sf(chi2),
    })
}
