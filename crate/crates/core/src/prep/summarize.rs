use serde::Serialize;

use crate::data::{Column, ColumnTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ZygosityLabels {
    pub mz: Vec<String>,
    pub dz: Vec<String>,
}

impl Default for ZygosityLabels {
    fn default() -> Self {
        Self {
            mz: vec!["MZMM".into(), "MZFF".into()],
            dz: vec!["DZMM".into(), "DZFF".into(), "DZOS".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwinSummary {
    pub variable: String,
    pub n_pairs_mz: usize,
    pub n_pairs_dz: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub r_mz: Option<f64>,
    pub r_dz: Option<f64>,
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return None;
    }
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Per base variable: complete-pair counts, pooled mean and SD over both twins and all groups,
/// and MZ/DZ cross-twin Pearson correlations (missing when undefined).
pub fn summarize_twin_data(
    data: &ColumnTable,
    bases: &[String],
    suffixes: &[String; 2],
    zygosity: &str,
    labels: &ZygosityLabels,
) -> Result<Vec<TwinSummary>> {
    let zyg: Vec<Option<String>> = (0..data.nrows())
        .map(|r| data.text_value(zygosity, r))
        .collect::<Result<_>>()?;
    for z in zyg.iter().flatten() {
        if !labels.mz.contains(z) && !labels.dz.contains(z) {
            return Err(Error::Data(format!("unknown zygosity label `{z}`")));
        }
    }
    let mut out = Vec::new();
    for b in bases {
        let cols: Vec<&[Option<f64>]> = suffixes
            .iter()
            .map(|s| {
                let c = format!("{b}{s}");
                match data.get(&c) {
                    Some(Column::Continuous(v)) => Ok(v.as_slice()),
                    Some(o) => Err(Error::Data(format!("`{c}` is {}, not continuous", o.kind()))),
                    None => Err(Error::Data(format!("no column named `{c}`"))),
                }
            })
            .collect::<Result<_>>()?;
        let all: Vec<Option<f64>> = cols.iter().flat_map(|c| c.iter().copied()).collect();
        let mv = crate::builders::mean_var(&all);
        let pairs_for = |set: &[String]| -> Vec<(f64, f64)> {
            (0..data.nrows())
                .filter(|&r| zyg[r].as_ref().is_some_and(|z| set.contains(z)))
                .filter_map(|r| Some((cols[0][r]?, cols[1][r]?)))
                .collect()
        };
        let (mz, dz) = (pairs_for(&labels.mz), pairs_for(&labels.dz));
        out.push(TwinSummary {
            variable: b.clone(),
            n_pairs_mz: mz.len(),
            n_pairs_dz: dz.len(),
            mean: mv.map(|(m, _)| m),
            sd: mv.map(|(_, v)| v.sqrt()),
            r_mz: pearson(&mz),
            r_dz: pearson(&dz),
        });
    }
    Ok(out)
}

/// Flat table form of a summary, one row per variable.
pub fn summary_table(rows: &[TwinSummary]) -> ColumnTable {
    let mut t = ColumnTable::with_rows(rows.len());
    let num = |f: &dyn Fn(&TwinSummary) -> Option<f64>| rows.iter().map(f).collect::<Vec<_>>();
    t.insert("variable", Column::Text(rows.iter().map(|r| Some(r.variable.clone())).collect()))
        .expect("row count matches");
    for (name, col) in [
        ("n_pairs_mz", num(&|r| Some(r.n_pairs_mz as f64))),
        ("n_pairs_dz", num(&|r| Some(r.n_pairs_dz as f64))),
        ("mean", num(&|r| r.mean)),
        ("sd", num(&|r| r.sd)),
        ("r_mz", num(&|r| r.r_mz)),
        ("r_dz", num(&|r| r.r_dz)),
    ] {
        t.insert_continuous(name, col).expect("row count matches");
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_mz_and_undefined_dz() {
        let mut d = ColumnTable::new();
        d.insert(
            "zyg",
            Column::Text(["MZMM", "MZFF", "MZMM", "DZOS"].iter().map(|s| Some(s.to_string())).collect()),
        )
        .unwrap();
        d.insert_continuous("x_T1", vec![Some(1.0), Some(2.0), Some(3.0), Some(0.0)]).unwrap();
        d.insert_continuous("x_T2", vec![Some(1.0), Some(2.0), Some(3.0), Some(5.0)]).unwrap();
        let s = ["_T1".to_string(), "_T2".to_string()];
        let r = summarize_twin_data(&d, &["x".into()], &s, "zyg", &ZygosityLabels::default()).unwrap();
        assert_eq!(r[0].r_mz, Some(1.0));
        assert_eq!(r[0].r_dz, None);
        assert_eq!((r[0].n_pairs_mz, r[0].n_pairs_dz), (3, 1));
        assert_eq!(summary_table(&r).nrows(), 1);
        let mut bad = d.clone();
        bad.insert("zyg", Column::Text(vec![Some("XX".into()); 4])).unwrap();
        assert!(summarize_twin_data(&bad, &["x".into()], &s, "zyg", &ZygosityLabels::default()).is_err());
    }
}
