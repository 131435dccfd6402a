//! OLS residualization with an intercept, in place, with missing rows kept as missing.

use nalgebra::{DMatrix, DVector};

use crate::data::{Column, ColumnTable};
use crate::error::{Error, Result};

/// A product of powers of covariates; `[("cyl", 2)]` is `I(cyl^2)`, `[("a", 1), ("b", 1)]` is `a:b`.
pub type Term = Vec<(String, u32)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub dv: String,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResidualSpec {
    /// Each DV regressed on the main effects of `covs`.
    Columns { dvs: Vec<String>, covs: Vec<String> },
    Formula(Formula),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residualized {
    pub data: ColumnTable,
    pub warnings: Vec<String>,
}

fn parse_err(msg: String) -> Error {
    Error::Parse { line: 1, message: msg }
}

fn ident(s: &str) -> Result<String> {
    let s = s.trim();
    let ok = !s.is_empty()
        && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.')
        && !s.starts_with(|c: char| c.is_ascii_digit());
    if ok {
        Ok(s.to_string())
    } else {
        Err(parse_err(format!("`{s}` is not a variable name")))
    }
}

/// `x`, or `I(x^k)` with integer k ≥ 1.
fn factor(s: &str) -> Result<(String, u32)> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix("I(").and_then(|r| r.strip_suffix(')')) {
        let (base, pow) = inner
            .split_once('^')
            .ok_or_else(|| parse_err(format!("only powers are supported inside I(): `{s}`")))?;
        let k: u32 = pow
            .trim()
            .parse()
            .ok()
            .filter(|&k| k >= 1)
            .ok_or_else(|| parse_err(format!("power in `{s}` must be a positive integer")))?;
        return Ok((ident(base)?, k));
    }
    Ok((ident(s)?, 1))
}

fn normalize(mut t: Term) -> Term {
    t.sort();
    let mut out: Term = Vec::new();
    for (v, k) in t {
        match out.last_mut() {
            Some((w, j)) if *w == v => *j += k,
            _ => out.push((v, k)),
        }
    }
    out
}

/// Parses `dv ~ t1 + t2 * t3 + I(x^2)`. `a*b` expands to `a + b + a:b`.
pub fn parse_formula(text: &str) -> Result<Formula> {
    let (lhs, rhs) = text
        .split_once('~')
        .ok_or_else(|| parse_err("formula has no `~`".into()))?;
    let dv = ident(lhs)?;
    let mut terms: Vec<Term> = Vec::new();
    for chunk in rhs.split('+') {
        let factors = chunk
            .split('*')
            .map(factor)
            .collect::<Result<Vec<_>>>()?;
        // every non-empty subset of the starred factors
        for mask in 1u32..(1 << factors.len()) {
            let t: Term = factors
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, f)| f.clone())
                .collect();
            let t = normalize(t);
            if !terms.contains(&t) {
                terms.push(t);
            }
        }
    }
    terms.sort_by_key(|t| t.len());
    Ok(Formula { dv, terms })
}

fn term_name(t: &Term) -> String {
    t.iter()
        .map(|(v, k)| if *k == 1 { v.clone() } else { format!("I({v}^{k})") })
        .collect::<Vec<_>>()
        .join(":")
}

fn numeric<'a>(data: &'a ColumnTable, col: &str, what: &str) -> Result<&'a [Option<f64>]> {
    match data.get(col) {
        None => Err(Error::Data(format!("no column named `{col}`"))),
        Some(Column::Ordinal { .. }) if what == "DV" => Err(Error::Data(format!(
            "`{col}` is ordinal; residualizing is undefined on the liability scale, model the covariate as a definition variable instead"
        ))),
        Some(c) => c
            .as_continuous()
            .ok_or_else(|| Error::Data(format!("{what} `{col}` must be continuous"))),
    }
}

/// Replaces each DV (or each suffixed copy of it) with OLS residuals. With suffixes, one pooled
/// regression over all copies gives every twin the same coefficients. Rows with any missing
/// regressor or DV get a missing residual; the row count never changes.
pub fn residualize(data: &ColumnTable, spec: &ResidualSpec, suffixes: Option<&[String]>) -> Result<Residualized> {
    let formulas: Vec<Formula> = match spec {
        ResidualSpec::Formula(f) => vec![f.clone()],
        ResidualSpec::Columns { dvs, covs } => {
            if dvs.is_empty() {
                return Err(Error::Data("no dependent variable given".into()));
            }
            dvs.iter()
                .map(|dv| Formula {
                    dv: dv.clone(),
                    terms: covs.iter().map(|c| vec![(c.clone(), 1)]).collect(),
                })
                .collect()
        }
    };
    let mut out = data.clone();
    let mut warnings = Vec::new();
    for f in &formulas {
        if f.terms.iter().any(|t| t.iter().any(|(v, _)| *v == f.dv)) {
            return Err(Error::Data(format!("`{}` appears on both sides", f.dv)));
        }
        let copies: Vec<String> = match suffixes {
            Some(s) if !s.is_empty() => s.to_vec(),
            _ => vec![String::new()],
        };
        // stacked (copy, row) observations with complete data
        let mut used: Vec<(usize, usize)> = Vec::new();
        let mut y = Vec::new();
        let mut x: Vec<Vec<f64>> = Vec::new();
        for (ci, s) in copies.iter().enumerate() {
            let dv = numeric(data, &format!("{}{s}", f.dv), "DV")?;
            let covs: Vec<(&[Option<f64>], u32)> = f
                .terms
                .iter()
                .flat_map(|t| t.iter())
                .map(|(v, k)| Ok((numeric(data, &format!("{v}{s}"), "covariate")?, *k)))
                .collect::<Result<_>>()?;
            for r in 0..data.nrows() {
                let Some(yv) = dv[r] else { continue };
                if covs.iter().any(|(c, _)| c[r].is_none()) {
                    continue;
                }
                let mut row = vec![1.0];
                let mut it = covs.iter();
                for t in &f.terms {
                    let mut p = 1.0;
                    for _ in t {
                        let (c, k) = it.next().expect("one column per factor");
                        p *= c[r].expect("checked").powi(*k as i32);
                    }
                    row.push(p);
                }
                used.push((ci, r));
                y.push(yv);
                x.push(row);
            }
        }
        let n = y.len();
        // constant regressors collapse into the intercept
        let mut keep = vec![0usize];
        for j in 1..=f.terms.len() {
            let first = x.first().map(|r| r[j]);
            if n > 0 && x.iter().all(|r| Some(r[j]) == first) {
                warnings.push(format!(
                    "`{}` is constant on the {} rows used for `{}`; fitted as intercept only",
                    term_name(&f.terms[j - 1]),
                    n,
                    f.dv
                ));
            } else {
                keep.push(j);
            }
        }
        let p = keep.len();
        if n < p {
            return Err(Error::Data(format!(
                "`{}` has {n} complete rows for {p} coefficients",
                f.dv
            )));
        }
        let xm = DMatrix::from_fn(n, p, |i, j| x[i][keep[j]]);
        let yv = DVector::from_vec(y.clone());
        let beta = least_squares(&xm, &yv).ok_or_else(|| {
            Error::Data(format!("design for `{}` is rank deficient (collinear covariates)", f.dv))
        })?;
        let fitted = &xm * &beta;
        let mut resid: Vec<Vec<Option<f64>>> = vec![vec![None; data.nrows()]; copies.len()];
        for (k, &(ci, r)) in used.iter().enumerate() {
            resid[ci][r] = Some(y[k] - fitted[k]);
        }
        for (s, col) in copies.iter().zip(resid) {
            out.insert_continuous(&format!("{}{s}", f.dv), col)?;
        }
    }
    Ok(Residualized { data: out, warnings })
}

/// Householder QR solve; None when a pivot is negligible relative to the largest.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let p = x.ncols();
    // column scaling keeps the rank test meaningful for covariates on very different scales
    let scale: Vec<f64> = (0..p)
        .map(|j| x.column(j).amax().max(f64::MIN_POSITIVE))
        .collect();
    let xs = DMatrix::from_fn(x.nrows(), p, |i, j| x[(i, j)] / scale[j]);
    let qr = xs.qr();
    let r = qr.r();
    let rmax = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..p).any(|i| r[(i, i)].abs() <= 1e-10 * rmax) {
        return None;
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let b = r.solve_upper_triangular(&qty.rows(0, p).into_owned())?;
    Some(DVector::from_fn(p, |j, _| b[j] / scale[j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_grammar() {
        let f = parse_formula("y ~ age * sex + I(age^2)").unwrap();
        assert_eq!(f.dv, "y");
        let names: Vec<String> = f.terms.iter().map(term_name).collect();
        assert_eq!(names, ["age", "sex", "I(age^2)", "age:sex"]);
        assert!(parse_formula("y ~ log(x)").is_err());
        assert!(parse_formula("y + x").is_err());
        assert!(parse_formula("y ~ I(x^0)").is_err());
    }

    #[test]
    fn constant_covariate_gives_centered_dv() {
        let mut d = ColumnTable::new();
        d.insert_continuous("y", vec![Some(1.0), Some(2.0), Some(6.0), None]).unwrap();
        d.insert_continuous("c", vec![Some(5.0); 4]).unwrap();
        let spec = ResidualSpec::Columns { dvs: vec!["y".into()], covs: vec!["c".into()] };
        let r = residualize(&d, &spec, None).unwrap();
        assert_eq!(r.warnings.len(), 1);
        let got = r.data.continuous("y").unwrap();
        assert_eq!(got[3], None);
        for (g, want) in got.iter().zip([-2.0, -1.0, 3.0]) {
            assert!((g.unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn collinear_and_ordinal_refused() {
        let mut d = ColumnTable::new();
        d.insert_continuous("y", vec![Some(1.0), Some(2.0), Some(4.0)]).unwrap();
        d.insert_continuous("a", vec![Some(1.0), Some(2.0), Some(3.0)]).unwrap();
        d.insert_continuous("b", vec![Some(2.0), Some(4.0), Some(6.0)]).unwrap();
        d.insert("o", Column::Ordinal { levels: vec!["0".into(), "1".into()], codes: vec![Some(0); 3] })
            .unwrap();
        let spec = ResidualSpec::Columns { dvs: vec!["y".into()], covs: vec!["a".into(), "b".into()] };
        assert!(residualize(&d, &spec, None).is_err());
        let spec = ResidualSpec::Columns { dvs: vec!["o".into()], covs: vec!["a".into()] };
        let e = residualize(&d, &spec, None).unwrap_err();
        assert!(e.to_string().contains("definition variable"));
    }
}
