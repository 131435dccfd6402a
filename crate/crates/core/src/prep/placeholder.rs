use serde::Serialize;

use crate::data::ColumnTable;
use crate::error::{Error, Result};

/// Covariate value written where a twin lacks the covariate but the cotwin has it.
pub const PLACEHOLDER: f64 = 99999.0;

fn pair_columns(covar: &str, pheno: &str, suffixes: &[String; 2]) -> Result<([String; 2], [String; 2])> {
    if covar == pheno {
        return Err(Error::Data("covariate and phenotype must differ".into()));
    }
    if suffixes[0] == suffixes[1] {
        return Err(Error::Data("twin suffixes must differ".into()));
    }
    Ok((
        [format!("{covar}{}", suffixes[0]), format!("{covar}{}", suffixes[1])],
        [format!("{pheno}{}", suffixes[0]), format!("{pheno}{}", suffixes[1])],
    ))
}

/// Where `covar<sfx_i>` is missing and the cotwin's is observed, sets it to 99999 and blanks
/// the same twin's `pheno<sfx_i>`. Rows with both covariates missing are left alone.
pub fn update_covariate_placeholders(
    data: &ColumnTable,
    covar: &str,
    pheno: &str,
    suffixes: &[String; 2],
) -> Result<ColumnTable> {
    let (cov, phe) = pair_columns(covar, pheno, suffixes)?;
    let mut out = data.clone();
    let c: [Vec<Option<f64>>; 2] = [data.continuous(&cov[0])?.to_vec(), data.continuous(&cov[1])?.to_vec()];
    for p in &phe {
        data.continuous(p)?;
    }
    for i in 0..2 {
        let other = 1 - i;
        let fill: Vec<usize> = (0..data.nrows())
            .filter(|&r| c[i][r].is_none() && c[other][r].is_some())
            .collect();
        let col = out.continuous_mut(&cov[i])?;
        for &r in &fill {
            col[r] = Some(PLACEHOLDER);
        }
        let col = out.continuous_mut(&phe[i])?;
        for &r in &fill {
            col[r] = None;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaceholderWarning {
    pub row: usize,
    pub twin: usize,
    pub covariate: String,
    pub phenotype: String,
}

impl std::fmt::Display for PlaceholderWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "row {} twin {}: `{}` is the 99999 placeholder but `{}` is observed",
            self.row + 1,
            self.twin,
            self.covariate,
            self.phenotype
        )
    }
}

/// Rows where a twin's covariate is 99999 while that twin's phenotype is observed.
pub fn validate_placeholders(
    data: &ColumnTable,
    covar: &str,
    pheno: &str,
    suffixes: &[String; 2],
) -> Result<Vec<PlaceholderWarning>> {
    if data.nrows() == 0 {
        return Ok(Vec::new());
    }
    let (cov, phe) = pair_columns(covar, pheno, suffixes)?;
    let mut out = Vec::new();
    for r in 0..data.nrows() {
        for i in 0..2 {
            let c = data.continuous(&cov[i])?[r];
            let p = data.continuous(&phe[i])?[r];
            if c == Some(PLACEHOLDER) && p.is_some() {
                out.push(PlaceholderWarning {
                    row: r,
                    twin: i + 1,
                    covariate: cov[i].clone(),
                    phenotype: phe[i].clone(),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sfx() -> [String; 2] {
        ["_T1".into(), "_T2".into()]
    }

    fn table() -> ColumnTable {
        let mut d = ColumnTable::new();
        d.insert_continuous("varA1_T1", vec![None, Some(0.1), None]).unwrap();
        d.insert_continuous("varA1_T2", vec![Some(0.409), Some(0.2), None]).unwrap();
        d.insert_continuous("varB1_T1", vec![Some(-0.449), Some(1.0), Some(2.0)]).unwrap();
        d.insert_continuous("varB1_T2", vec![Some(2.58), Some(1.5), Some(3.0)]).unwrap();
        d
    }

    #[test]
    fn fills_only_when_cotwin_observed() {
        let out = update_covariate_placeholders(&table(), "varA1", "varB1", &sfx()).unwrap();
        assert_eq!(out.continuous("varA1_T1").unwrap(), &[Some(99999.0), Some(0.1), None]);
        assert_eq!(out.continuous("varB1_T1").unwrap(), &[None, Some(1.0), Some(2.0)]);
        assert_eq!(out.continuous("varB1_T2").unwrap(), table().continuous("varB1_T2").unwrap());
        let twice = update_covariate_placeholders(&out, "varA1", "varB1", &sfx()).unwrap();
        assert_eq!(twice, out);
        assert!(validate_placeholders(&out, "varA1", "varB1", &sfx()).unwrap().is_empty());
    }

    #[test]
    fn flags_placeholder_with_observed_phenotype() {
        let mut d = table();
        d.continuous_mut("varA1_T2").unwrap()[1] = Some(99999.0);
        let w = validate_placeholders(&d, "varA1", "varB1", &sfx()).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!((w[0].row, w[0].twin), (1, 2));
        assert!(validate_placeholders(&ColumnTable::new(), "a", "b", &sfx()).unwrap().is_empty());
        assert!(update_covariate_placeholders(&d, "x", "x", &sfx()).is_err());
    }
}
